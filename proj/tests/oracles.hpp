// Test-only reference implementations, kept independent of the library code
// paths they are used to check.
#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <vector>

#include "vesselplan/graph.hpp"
#include "vesselplan/grid.hpp"
#include "vesselplan/rng.hpp"
#include "vesselplan/skeleton.hpp"

namespace oracle {

using vplan::BinaryMask;
using vplan::Grid;
using vplan::Pixel;
using vplan::Spacing;

// O(N^2) anisotropic distance transform: min over background pixel centers.
inline Grid distance_transform(const BinaryMask& mask) {
  Grid out(mask.width(), mask.height(), mask.spacing());
  std::vector<Pixel> background;
  for (int r = 0; r < mask.height(); ++r)
    for (int c = 0; c < mask.width(); ++c)
      if (!mask.at(r, c)) background.push_back({r, c});
  for (int r = 0; r < mask.height(); ++r)
    for (int c = 0; c < mask.width(); ++c) {
      if (!mask.at(r, c)) {
        out.at(r, c) = 0.0;
        continue;
      }
      double best = std::numeric_limits<double>::infinity();
      for (const Pixel& q : background) {
        double d = std::hypot(mask.spacing().sy * (r - q.r), mask.spacing().sx * (c - q.c));
        best = std::min(best, d);
      }
      out.at(r, c) = best;
    }
  return out;
}

// Dilate-then-erode on a canvas padded by the half width, cropped back.
inline BinaryMask morphological_close(const BinaryMask& mask, int kernel) {
  int h = kernel / 2;
  int w = mask.width() + 2 * h, ht = mask.height() + 2 * h;
  auto fg = [&](const std::vector<uint8_t>& img, int r, int c) {
    return r >= 0 && r < ht && c >= 0 && c < w && img[static_cast<size_t>(r) * w + c];
  };
  std::vector<uint8_t> padded(static_cast<size_t>(w) * ht, 0);
  for (int r = 0; r < mask.height(); ++r)
    for (int c = 0; c < mask.width(); ++c)
      padded[static_cast<size_t>(r + h) * w + (c + h)] = mask.at(r, c);
  std::vector<uint8_t> dil(padded.size(), 0), ero(padded.size(), 0);
  for (int r = 0; r < ht; ++r)
    for (int c = 0; c < w; ++c) {
      bool any = false;
      for (int dr = -h; dr <= h && !any; ++dr)
        for (int dc = -h; dc <= h && !any; ++dc)
          if (fg(padded, r + dr, c + dc)) any = true;
      dil[static_cast<size_t>(r) * w + c] = any;
    }
  for (int r = 0; r < ht; ++r)
    for (int c = 0; c < w; ++c) {
      bool all = true;
      for (int dr = -h; dr <= h && all; ++dr)
        for (int dc = -h; dc <= h && all; ++dc)
          if (!fg(dil, r + dr, c + dc)) all = false;
      ero[static_cast<size_t>(r) * w + c] = all;
    }
  BinaryMask out(mask.width(), mask.height(), mask.spacing());
  for (int r = 0; r < mask.height(); ++r)
    for (int c = 0; c < mask.width(); ++c)
      out.at(r, c) = ero[static_cast<size_t>(r + h) * w + (c + h)];
  return out;
}

// Test-local 8-connected component count (flood fill over a predicate).
template <typename IsOn>
int component_count(int width, int height, IsOn&& on) {
  std::vector<char> seen(static_cast<size_t>(width) * height, 0);
  int count = 0;
  std::vector<std::pair<int, int>> stack;
  for (int r = 0; r < height; ++r)
    for (int c = 0; c < width; ++c) {
      if (!on(r, c) || seen[static_cast<size_t>(r) * width + c]) continue;
      ++count;
      stack.push_back({r, c});
      seen[static_cast<size_t>(r) * width + c] = 1;
      while (!stack.empty()) {
        auto [cr, cc] = stack.back();
        stack.pop_back();
        for (int dr = -1; dr <= 1; ++dr)
          for (int dc = -1; dc <= 1; ++dc) {
            int nr = cr + dr, nc = cc + dc;
            if ((dr | dc) == 0 || nr < 0 || nr >= height || nc < 0 || nc >= width) continue;
            if (on(nr, nc) && !seen[static_cast<size_t>(nr) * width + nc]) {
              seen[static_cast<size_t>(nr) * width + nc] = 1;
              stack.push_back({nr, nc});
            }
          }
      }
    }
  return count;
}

inline int component_count(const BinaryMask& m) {
  return component_count(m.width(), m.height(), [&](int r, int c) { return m.at(r, c) != 0; });
}

inline int component_count(const vplan::Skeleton& s) {
  return component_count(s.width(), s.height(), [&](int r, int c) { return s.contains({r, c}); });
}

// Random blobby masks for property tests.
inline BinaryMask random_mask(vplan::Rng& rng, int max_side = 64, Spacing spacing = {}) {
  int w = rng.uniform_int(8, max_side);
  int h = rng.uniform_int(8, max_side);
  BinaryMask m(w, h, spacing);
  int blobs = rng.uniform_int(1, 6);
  for (int b = 0; b < blobs; ++b) {
    int cr = rng.uniform_int(0, h - 1), cc = rng.uniform_int(0, w - 1);
    int rad = rng.uniform_int(1, 5);
    for (int r = std::max(0, cr - rad); r <= std::min(h - 1, cr + rad); ++r)
      for (int c = std::max(0, cc - rad); c <= std::min(w - 1, cc + rad); ++c)
        if ((r - cr) * (r - cr) + (c - cc) * (c - cc) <= rad * rad) m.at(r, c) = 1;
  }
  if (rng.bernoulli(0.5)) {
    int speckles = rng.uniform_int(0, w * h / 8);
    for (int i = 0; i < speckles; ++i)
      m.at(rng.uniform_int(0, h - 1), rng.uniform_int(0, w - 1)) = 1;
  }
  // Keep at least one background pixel so the distance transform is defined.
  m.at(0, 0) = 0;
  return m;
}

// Exhaustive best-simple-path search maximizing sum(log p), ties broken by
// node sequence then edge sequence, mirroring the planner's total order.
struct EnumeratedPath {
  bool found = false;
  double cost = 0.0;  // sum of -log p
  std::vector<int> nodes;
  std::vector<int> edges;
};

inline void enumerate_paths(const vplan::VesselGraph& g, int target, std::vector<int>& nodes,
                            std::vector<int>& edges, std::vector<char>& visited, double cost,
                            EnumeratedPath& best) {
  int u = nodes.back();
  if (u == target) {
    bool better = false;
    if (!best.found) better = true;
    else if (cost != best.cost) better = cost < best.cost;
    else if (nodes != best.nodes) better = nodes < best.nodes;
    else better = edges < best.edges;
    if (better) best = {true, cost, nodes, edges};
    return;
  }
  for (int eid : g.incident_edges(u)) {
    const vplan::VesselEdge& e = g.edge(eid);
    int v = e.node_a == u ? e.node_b : e.node_a;
    if (v == u || visited[v]) continue;
    visited[v] = 1;
    nodes.push_back(v);
    edges.push_back(eid);
    enumerate_paths(g, target, nodes, edges, visited, cost + -std::log(*e.probability), best);
    nodes.pop_back();
    edges.pop_back();
    visited[v] = 0;
  }
}

inline EnumeratedPath best_simple_path(const vplan::VesselGraph& g, int source, int target) {
  EnumeratedPath best;
  std::vector<int> nodes{source}, edges;
  std::vector<char> visited(g.nodes.size(), 0);
  visited[source] = 1;
  enumerate_paths(g, target, nodes, edges, visited, 0.0, best);
  return best;
}

}  // namespace oracle
