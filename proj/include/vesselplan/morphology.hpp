#pragma once

#include "vesselplan/grid.hpp"

namespace vplan {

namespace detail {

// Dilation/erosion with a (2h+1)x(2h+1) square element on an explicit canvas.
// Pixels outside the canvas read as background.
inline BinaryMask dilate_square(const BinaryMask& m, int h) {
  BinaryMask out(m.width(), m.height(), m.spacing());
  for (int r = 0; r < m.height(); ++r)
    for (int c = 0; c < m.width(); ++c) {
      bool hit = false;
      for (int dr = -h; dr <= h && !hit; ++dr)
        for (int dc = -h; dc <= h && !hit; ++dc)
          if (m.foreground(r + dr, c + dc)) hit = true;
      out.at(r, c) = hit ? 1 : 0;
    }
  return out;
}

inline BinaryMask erode_square(const BinaryMask& m, int h) {
  BinaryMask out(m.width(), m.height(), m.spacing());
  for (int r = 0; r < m.height(); ++r)
    for (int c = 0; c < m.width(); ++c) {
      bool all = true;
      for (int dr = -h; dr <= h && all; ++dr)
        for (int dc = -h; dc <= h && all; ++dc)
          if (!m.foreground(r + dr, c + dc)) all = false;
      out.at(r, c) = all ? 1 : 0;
    }
  return out;
}

}  // namespace detail

// Morphological closing (dilate, then erode) with an odd square structuring
// element. The mask is treated as embedded in the infinite plane with
// background outside the grid: dilation is computed on a canvas padded by the
// element half-width so that erosion sees the full dilated set. The closed set
// always fits back inside the original grid.
inline BinaryMask morphological_close(const BinaryMask& mask, int kernel_size = 3) {
  if (kernel_size < 1 || kernel_size % 2 == 0)
    throw InvalidParameter("morphological_close: kernel size must be odd and >= 1");
  int h = kernel_size / 2;
  if (h == 0) return mask;

  BinaryMask padded(mask.width() + 2 * h, mask.height() + 2 * h, mask.spacing());
  for (int r = 0; r < mask.height(); ++r)
    for (int c = 0; c < mask.width(); ++c)
      padded.at(r + h, c + h) = mask.at(r, c);

  BinaryMask closed = detail::erode_square(detail::dilate_square(padded, h), h);

  BinaryMask out(mask.width(), mask.height(), mask.spacing());
  for (int r = 0; r < mask.height(); ++r)
    for (int c = 0; c < mask.width(); ++c)
      out.at(r, c) = closed.at(r + h, c + h);
  return out;
}

}  // namespace vplan
