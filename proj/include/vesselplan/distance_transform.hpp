#pragma once

#include <limits>
#include <vector>

#include "vesselplan/grid.hpp"

namespace vplan {

namespace detail {

// 1D squared-distance transform over samples at physical positions pos[i]
// (lower envelope of parabolas, Felzenszwalb & Huttenlocher). Exact.
inline void sq_dist_1d(const std::vector<double>& f, const std::vector<double>& pos,
                       std::vector<double>& out) {
  const int n = static_cast<int>(f.size());
  constexpr double kInf = std::numeric_limits<double>::infinity();
  static thread_local std::vector<int> v;
  static thread_local std::vector<double> z;
  v.assign(n, 0);
  z.assign(n + 1, 0.0);

  int k = 0;
  v[0] = 0;
  z[0] = -kInf;
  z[1] = kInf;
  for (int q = 1; q < n; ++q) {
    if (f[q] == kInf) continue;
    double s = 0.0;
    while (true) {
      int p = v[k];
      if (f[p] == kInf) {
        // No finite parabola yet, replace.
        --k;
        if (k < 0) break;
        continue;
      }
      s = ((f[q] + pos[q] * pos[q]) - (f[p] + pos[p] * pos[p])) / (2.0 * (pos[q] - pos[p]));
      if (s <= z[k]) {
        --k;
        if (k < 0) break;
      } else {
        break;
      }
    }
    ++k;
    v[k] = q;
    z[k] = k > 0 ? s : -kInf;
    z[k + 1] = kInf;
  }

  k = 0;
  for (int q = 0; q < n; ++q) {
    while (z[k + 1] < pos[q]) ++k;
    int p = v[k];
    double d = pos[q] - pos[p];
    out[q] = f[p] == kInf ? kInf : f[p] + d * d;
  }
}

}  // namespace detail

// Exact Euclidean distance transform under the anisotropic metric
// M = diag(sx, sy): each foreground pixel receives the distance to the
// nearest background pixel center, background pixels receive 0.
inline DistanceMap distance_transform(const BinaryMask& mask) {
  const int w = mask.width(), h = mask.height();
  const Spacing s = mask.spacing();
  constexpr double kInf = std::numeric_limits<double>::infinity();

  if (mask.count_foreground() == static_cast<size_t>(w) * h)
    throw InvalidInput("distance_transform: mask has no background pixel, distance is unbounded");

  Grid sq(w, h, s);
  // Pass 1: squared distance along columns (row offsets scale with sy).
  {
    std::vector<double> f(h), pos(h), out(h);
    for (int r = 0; r < h; ++r) pos[r] = s.sy * r;
    for (int c = 0; c < w; ++c) {
      for (int r = 0; r < h; ++r) f[r] = mask.at(r, c) ? kInf : 0.0;
      detail::sq_dist_1d(f, pos, out);
      for (int r = 0; r < h; ++r) sq.at(r, c) = out[r];
    }
  }
  // Pass 2: along rows (column offsets scale with sx).
  DistanceMap dist(w, h, s);
  {
    std::vector<double> f(w), pos(w), out(w);
    for (int c = 0; c < w; ++c) pos[c] = s.sx * c;
    for (int r = 0; r < h; ++r) {
      for (int c = 0; c < w; ++c) f[c] = sq.at(r, c);
      detail::sq_dist_1d(f, pos, out);
      for (int c = 0; c < w; ++c) dist.at(r, c) = mask.at(r, c) ? std::sqrt(out[c]) : 0.0;
    }
  }
  return dist;
}

}  // namespace vplan
