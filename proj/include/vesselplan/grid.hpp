#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "vesselplan/errors.hpp"

namespace vplan {

// Physical pixel spacing. sx scales column offsets, sy scales row offsets.
struct Spacing {
  double sx = 1.0;
  double sy = 1.0;

  void validate() const {
    if (!(sx > 0.0) || !(sy > 0.0)) throw InvalidParameter("spacing components must be > 0");
  }
  bool operator==(const Spacing&) const = default;
};

struct Pixel {
  int r = 0;
  int c = 0;

  bool operator==(const Pixel&) const = default;
  auto operator<=>(const Pixel&) const = default;
};

// Chebyshev adjacency, i.e. 8-connectivity. A pixel is not adjacent to itself.
inline bool adjacent8(Pixel a, Pixel b) {
  int dr = std::abs(a.r - b.r), dc = std::abs(a.c - b.c);
  return (dr <= 1 && dc <= 1) && (dr + dc > 0);
}

// Physical length of the displacement (dr, dc) under M = diag(sx, sy).
inline double metric_step(double dr, double dc, const Spacing& s) {
  return std::hypot(s.sy * dr, s.sx * dc);
}

// Row-major 2D scalar field with physical spacing.
class Grid {
 public:
  Grid() = default;
  Grid(int width, int height, Spacing spacing = {}, double fill = 0.0)
      : width_(width), height_(height), spacing_(spacing),
        values_(static_cast<size_t>(width) * height, fill) {
    if (width < 1 || height < 1) throw InvalidParameter("grid dimensions must be >= 1");
    spacing.validate();
  }

  int width() const { return width_; }
  int height() const { return height_; }
  const Spacing& spacing() const { return spacing_; }
  void set_spacing(Spacing s) { s.validate(); spacing_ = s; }

  bool in_bounds(int r, int c) const { return r >= 0 && r < height_ && c >= 0 && c < width_; }
  bool in_bounds(Pixel p) const { return in_bounds(p.r, p.c); }

  double at(int r, int c) const { return values_[static_cast<size_t>(r) * width_ + c]; }
  double& at(int r, int c) { return values_[static_cast<size_t>(r) * width_ + c]; }
  double at(Pixel p) const { return at(p.r, p.c); }
  double& at(Pixel p) { return at(p.r, p.c); }

  const std::vector<double>& values() const { return values_; }
  std::vector<double>& values() { return values_; }

  bool is_probability_map() const {
    for (double v : values_)
      if (!(v >= 0.0 && v <= 1.0)) return false;
    return true;
  }

 private:
  int width_ = 0;
  int height_ = 0;
  Spacing spacing_;
  std::vector<double> values_;
};

// Distances in physical units; 0 exactly on background.
using DistanceMap = Grid;

// Grid restricted to {0,1}, stored compactly.
class BinaryMask {
 public:
  BinaryMask() = default;
  BinaryMask(int width, int height, Spacing spacing = {}, uint8_t fill = 0)
      : width_(width), height_(height), spacing_(spacing),
        values_(static_cast<size_t>(width) * height, fill) {
    if (width < 1 || height < 1) throw InvalidParameter("mask dimensions must be >= 1");
    spacing.validate();
  }

  int width() const { return width_; }
  int height() const { return height_; }
  const Spacing& spacing() const { return spacing_; }
  void set_spacing(Spacing s) { s.validate(); spacing_ = s; }

  bool in_bounds(int r, int c) const { return r >= 0 && r < height_ && c >= 0 && c < width_; }
  bool in_bounds(Pixel p) const { return in_bounds(p.r, p.c); }

  uint8_t at(int r, int c) const { return values_[static_cast<size_t>(r) * width_ + c]; }
  uint8_t& at(int r, int c) { return values_[static_cast<size_t>(r) * width_ + c]; }
  uint8_t at(Pixel p) const { return at(p.r, p.c); }
  uint8_t& at(Pixel p) { return at(p.r, p.c); }

  // Out-of-bounds reads count as background.
  bool foreground(int r, int c) const { return in_bounds(r, c) && at(r, c) != 0; }
  bool foreground(Pixel p) const { return foreground(p.r, p.c); }

  const std::vector<uint8_t>& values() const { return values_; }
  std::vector<uint8_t>& values() { return values_; }

  size_t count_foreground() const {
    size_t n = 0;
    for (uint8_t v : values_) n += (v != 0);
    return n;
  }

  bool operator==(const BinaryMask&) const = default;

 private:
  int width_ = 0;
  int height_ = 0;
  Spacing spacing_;
  std::vector<uint8_t> values_;
};

// Threshold a probability map: output 1 iff value >= tau.
inline BinaryMask binarize(const Grid& map, double tau) {
  if (!(tau >= 0.0 && tau <= 1.0)) throw InvalidParameter("binarize: tau must lie in [0,1]");
  if (!map.is_probability_map()) throw InvalidInput("binarize: map values must lie in [0,1]");
  BinaryMask out(map.width(), map.height(), map.spacing());
  for (int r = 0; r < map.height(); ++r)
    for (int c = 0; c < map.width(); ++c)
      out.at(r, c) = map.at(r, c) >= tau ? 1 : 0;
  return out;
}

}  // namespace vplan
