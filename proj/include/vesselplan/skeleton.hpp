#pragma once

#include <algorithm>
#include <array>
#include <vector>

#include "vesselplan/grid.hpp"

namespace vplan {

// Neighbor offsets in Zhang-Suen order P2..P9: N, NE, E, SE, S, SW, W, NW.
inline constexpr std::array<Pixel, 8> kNeighbors8 = {
    Pixel{-1, 0}, Pixel{-1, 1}, Pixel{0, 1}, Pixel{1, 1},
    Pixel{1, 0},  Pixel{1, -1}, Pixel{0, -1}, Pixel{-1, -1}};

// 1-pixel-wide centerline set with 8-connectivity.
class Skeleton {
 public:
  Skeleton() = default;
  Skeleton(int width, int height, Spacing spacing = {})
      : width_(width), height_(height), spacing_(spacing),
        on_(static_cast<size_t>(width) * height, 0) {
    if (width < 1 || height < 1) throw InvalidParameter("skeleton dimensions must be >= 1");
    spacing.validate();
  }

  int width() const { return width_; }
  int height() const { return height_; }
  const Spacing& spacing() const { return spacing_; }

  bool in_bounds(Pixel p) const { return p.r >= 0 && p.r < height_ && p.c >= 0 && p.c < width_; }
  bool contains(Pixel p) const { return in_bounds(p) && on_[index(p)] != 0; }
  void add(Pixel p) { on_[index(p)] = 1; }
  void remove(Pixel p) { on_[index(p)] = 0; }

  int neighbor_count(Pixel p) const {
    int n = 0;
    for (const Pixel& d : kNeighbors8) n += contains({p.r + d.r, p.c + d.c});
    return n;
  }

  std::vector<Pixel> neighbors(Pixel p) const {
    std::vector<Pixel> out;
    for (const Pixel& d : kNeighbors8) {
      Pixel q{p.r + d.r, p.c + d.c};
      if (contains(q)) out.push_back(q);
    }
    return out;
  }

  // Sorted by (row, col).
  std::vector<Pixel> pixels() const {
    std::vector<Pixel> out;
    for (int r = 0; r < height_; ++r)
      for (int c = 0; c < width_; ++c)
        if (on_[static_cast<size_t>(r) * width_ + c]) out.push_back({r, c});
    return out;
  }

  size_t size() const {
    size_t n = 0;
    for (uint8_t v : on_) n += v;
    return n;
  }

  bool operator==(const Skeleton&) const = default;

 private:
  size_t index(Pixel p) const { return static_cast<size_t>(p.r) * width_ + p.c; }

  int width_ = 0;
  int height_ = 0;
  Spacing spacing_;
  std::vector<uint8_t> on_;
};

namespace detail {

// Number of 0->1 transitions in the circular sequence P2,P3,...,P9,P2.
inline int crossing_number(const Skeleton& s, Pixel p) {
  int a = 0;
  for (size_t i = 0; i < 8; ++i) {
    const Pixel& d0 = kNeighbors8[i];
    const Pixel& d1 = kNeighbors8[(i + 1) % 8];
    bool v0 = s.contains({p.r + d0.r, p.c + d0.c});
    bool v1 = s.contains({p.r + d1.r, p.c + d1.c});
    if (!v0 && v1) ++a;
  }
  return a;
}

// Classical (8,4) simple-point test: deleting p preserves topology iff the
// foreground in the 8-neighborhood forms exactly one 8-connected component
// and the background forms exactly one 4-connected component touching a
// 4-neighbor of p. Strictly more permissive than crossing number 1, which
// misses the diagonal adjacency between two edge neighbors whose shared
// corner is off (the configuration that deadlocks thinning on thick
// staircases).
inline bool is_simple8(const Skeleton& s, Pixel p) {
  bool v[8];
  int fg_count = 0;
  for (size_t i = 0; i < 8; ++i) {
    v[i] = s.contains({p.r + kNeighbors8[i].r, p.c + kNeighbors8[i].c});
    fg_count += v[i];
  }
  if (fg_count == 0) return false;

  // Ring adjacency: consecutive positions always touch; two edge positions
  // (even indices) two apart touch diagonally across the missing corner.
  auto fg_adjacent = [&](int i, int j) {
    int d = (j - i + 8) % 8;
    if (d == 1 || d == 7) return true;
    if ((d == 2 && i % 2 == 0) || (d == 6 && j % 2 == 0)) return true;
    return false;
  };
  int fg_comps = 0;
  bool seen[8] = {};
  for (int i = 0; i < 8; ++i) {
    if (!v[i] || seen[i]) continue;
    ++fg_comps;
    int stack[8], top = 0;
    stack[top++] = i;
    seen[i] = true;
    while (top > 0) {
      int u = stack[--top];
      for (int j = 0; j < 8; ++j)
        if (v[j] && !seen[j] && fg_adjacent(u, j)) {
          seen[j] = true;
          stack[top++] = j;
        }
    }
  }
  if (fg_comps != 1) return false;

  // Background: 4-adjacency between ring pixels is consecutive-only. Count
  // components that touch a 4-neighbor of p (even ring positions).
  int bg_comps_touching = 0;
  bool bseen[8] = {};
  for (int i = 0; i < 8; ++i) {
    if (v[i] || bseen[i]) continue;
    bool touches = false;
    int stack[8], top = 0;
    stack[top++] = i;
    bseen[i] = true;
    while (top > 0) {
      int u = stack[--top];
      if (u % 2 == 0) touches = true;
      for (int j = 0; j < 8; ++j) {
        int d = (j - u + 8) % 8;
        if ((d == 1 || d == 7) && !v[j] && !bseen[j]) {
          bseen[j] = true;
          stack[top++] = j;
        }
      }
    }
    if (touches) ++bg_comps_touching;
  }
  return bg_comps_touching == 1;
}

inline bool zs_candidate(const Skeleton& s, Pixel p, bool second_pass) {
  int b = s.neighbor_count(p);
  if (b < 2 || b > 6) return false;
  if (crossing_number(s, p) != 1) return false;
  bool n = s.contains({p.r - 1, p.c});
  bool e = s.contains({p.r, p.c + 1});
  bool so = s.contains({p.r + 1, p.c});
  bool w = s.contains({p.r, p.c - 1});
  if (!second_pass) return !(n && e && so) && !(e && so && w);
  return !(n && e && w) && !(n && so && w);
}

}  // namespace detail

// Zhang-Suen two-subiteration thinning. Deletion flags are computed on a
// snapshot per subiteration, then applied in scan order with a connectivity
// re-check (crossing number 1, at least 2 neighbors) against the current
// image. The parallel variant can erase isolated 2x2 blocks outright; the
// re-check keeps every deletion a simple-point deletion, so the number of
// 8-connected components is preserved.
inline Skeleton skeletonize(const BinaryMask& mask) {
  Skeleton s(mask.width(), mask.height(), mask.spacing());
  for (int r = 0; r < mask.height(); ++r)
    for (int c = 0; c < mask.width(); ++c)
      if (mask.at(r, c)) s.add({r, c});

  std::vector<Pixel> flagged;
  bool changed = true;
  while (changed) {
    changed = false;
    for (int pass = 0; pass < 2; ++pass) {
      flagged.clear();
      for (int r = 0; r < s.height(); ++r)
        for (int c = 0; c < s.width(); ++c) {
          Pixel p{r, c};
          if (s.contains(p) && detail::zs_candidate(s, p, pass == 1)) flagged.push_back(p);
        }
      for (const Pixel& p : flagged) {
        if (s.neighbor_count(p) >= 2 && detail::is_simple8(s, p)) {
          s.remove(p);
          changed = true;
        }
      }
    }
  }

  // The re-checked subiterations can stall on residual thick spots (the scan
  // order blocks deletions another order would allow). A sequential
  // simple-point pass shaves whatever stayed behind: deleting a simple pixel
  // with at least 2 neighbors never changes topology, and a pixel that is not
  // an endpoint of a fully thinned skeleton is never simple.
  bool shaved = true;
  while (shaved) {
    shaved = false;
    for (int r = 0; r < s.height(); ++r)
      for (int c = 0; c < s.width(); ++c) {
        Pixel p{r, c};
        if (!s.contains(p)) continue;
        if (s.neighbor_count(p) >= 2 && detail::is_simple8(s, p)) {
          s.remove(p);
          shaved = true;
        }
      }
  }
  return s;
}

// Remove terminal branches (endpoint to nearest junction, interior all
// degree 2) whose metric arc length is below l_min. Iterates to fixpoint:
// deleting a spur may expose new endpoints at the junction.
inline Skeleton prune_spurs(const Skeleton& skeleton, double l_min) {
  if (l_min < 0.0) throw InvalidParameter("prune_spurs: l_min must be >= 0");
  Skeleton s = skeleton;
  const Spacing sp = s.spacing();

  bool changed = true;
  while (changed) {
    changed = false;
    std::vector<Pixel> to_delete;
    for (const Pixel& e : s.pixels()) {
      if (s.neighbor_count(e) != 1) continue;
      std::vector<Pixel> branch{e};
      Pixel prev = e;
      Pixel cur = s.neighbors(e)[0];
      double len = metric_step(cur.r - e.r, cur.c - e.c, sp);
      bool spur = false;
      while (true) {
        int deg = s.neighbor_count(cur);
        if (deg >= 3) {
          spur = len < l_min;
          break;
        }
        if (deg == 1) break;  // free chain, endpoint to endpoint: not a spur
        branch.push_back(cur);
        Pixel next{};
        for (const Pixel& q : s.neighbors(cur))
          if (!(q == prev)) { next = q; break; }
        len += metric_step(next.r - cur.r, next.c - cur.c, sp);
        prev = cur;
        cur = next;
      }
      if (spur) to_delete.insert(to_delete.end(), branch.begin(), branch.end());
    }
    for (const Pixel& p : to_delete) {
      s.remove(p);
      changed = true;
    }
  }
  return s;
}

// 8-connected foreground component count; shared by masks and skeletons.
inline int count_components8(int width, int height, auto&& is_on) {
  std::vector<uint8_t> seen(static_cast<size_t>(width) * height, 0);
  std::vector<Pixel> stack;
  int components = 0;
  for (int r = 0; r < height; ++r)
    for (int c = 0; c < width; ++c) {
      if (!is_on(r, c) || seen[static_cast<size_t>(r) * width + c]) continue;
      ++components;
      stack.push_back({r, c});
      seen[static_cast<size_t>(r) * width + c] = 1;
      while (!stack.empty()) {
        Pixel p = stack.back();
        stack.pop_back();
        for (const Pixel& d : kNeighbors8) {
          int nr = p.r + d.r, nc = p.c + d.c;
          if (nr < 0 || nr >= height || nc < 0 || nc >= width) continue;
          size_t i = static_cast<size_t>(nr) * width + nc;
          if (!seen[i] && is_on(nr, nc)) {
            seen[i] = 1;
            stack.push_back({nr, nc});
          }
        }
      }
    }
  return components;
}

inline int count_components8(const BinaryMask& m) {
  return count_components8(m.width(), m.height(), [&](int r, int c) { return m.at(r, c) != 0; });
}

inline int count_components8(const Skeleton& s) {
  return count_components8(s.width(), s.height(),
                           [&](int r, int c) { return s.contains({r, c}); });
}

}  // namespace vplan
