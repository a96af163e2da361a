#pragma once

#include <png.h>

#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <memory>
#include <string>
#include <vector>

#include "vesselplan/grid.hpp"

namespace vplan {

namespace detail {

struct FileCloser {
  void operator()(std::FILE* f) const { if (f) std::fclose(f); }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

inline FilePtr open_file(const std::string& path, const char* mode) {
  FilePtr f(std::fopen(path.c_str(), mode));
  if (!f) throw IoError("cannot open file: " + path);
  return f;
}

}  // namespace detail

// 8-bit rows -> PNG grayscale file. Fixed encoder settings so identical pixel
// data produces identical bytes across runs.
inline void write_png_gray8(const std::string& path, int width, int height,
                            const std::vector<uint8_t>& pixels) {
  if (pixels.size() != static_cast<size_t>(width) * height)
    throw InvalidParameter("write_png_gray8: pixel buffer size mismatch");
  auto file = detail::open_file(path, "wb");

  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    throw IoError("libpng init failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw IoError("PNG write failed: " + path);
  }
  png_init_io(png, file.get());
  png_set_compression_level(png, 6);
  png_set_IHDR(png, info, width, height, 8, PNG_COLOR_TYPE_GRAY,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int r = 0; r < height; ++r)
    png_write_row(png, const_cast<png_bytep>(pixels.data() + static_cast<size_t>(r) * width));
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

inline void save_png(const std::string& path, const Grid& image) {
  std::vector<uint8_t> bytes(static_cast<size_t>(image.width()) * image.height());
  for (int r = 0; r < image.height(); ++r)
    for (int c = 0; c < image.width(); ++c) {
      double v = image.at(r, c);
      v = v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v);
      bytes[static_cast<size_t>(r) * image.width() + c] =
          static_cast<uint8_t>(std::lround(v * 255.0));
    }
  write_png_gray8(path, image.width(), image.height(), bytes);
}

inline void save_png(const std::string& path, const BinaryMask& mask) {
  std::vector<uint8_t> bytes(static_cast<size_t>(mask.width()) * mask.height());
  for (int r = 0; r < mask.height(); ++r)
    for (int c = 0; c < mask.width(); ++c)
      bytes[static_cast<size_t>(r) * mask.width() + c] = mask.at(r, c) ? 255 : 0;
  write_png_gray8(path, mask.width(), mask.height(), bytes);
}

// Grayscale PNG (8- or 16-bit) -> Grid with values rescaled to [0,1].
inline Grid load_png(const std::string& path, Spacing spacing = {}) {
  auto file = detail::open_file(path, "rb");
  uint8_t sig[8];
  if (std::fread(sig, 1, 8, file.get()) != 8 || png_sig_cmp(sig, 0, 8))
    throw ParseError("not a PNG file: " + path);

  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError("libpng init failed");
  }
  std::vector<std::vector<uint8_t>> rows;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw ParseError("PNG read failed: " + path);
  }
  png_init_io(png, file.get());
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);

  png_uint_32 w = png_get_image_width(png, info);
  png_uint_32 h = png_get_image_height(png, info);
  int depth = png_get_bit_depth(png, info);
  int color = png_get_color_type(png, info);

  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (color & PNG_COLOR_MASK_COLOR) png_set_rgb_to_gray_fixed(png, 1, -1, -1);
  if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
  png_read_update_info(png, info);
  depth = png_get_bit_depth(png, info);

  size_t rowbytes = png_get_rowbytes(png, info);
  rows.assign(h, std::vector<uint8_t>(rowbytes));
  for (png_uint_32 r = 0; r < h; ++r) png_read_row(png, rows[r].data(), nullptr);
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);

  Grid g(static_cast<int>(w), static_cast<int>(h), spacing);
  const double denom = depth == 16 ? 65535.0 : 255.0;
  for (png_uint_32 r = 0; r < h; ++r)
    for (png_uint_32 c = 0; c < w; ++c) {
      double v;
      if (depth == 16)
        v = (rows[r][2 * c] << 8 | rows[r][2 * c + 1]) / denom;  // PNG is big-endian
      else
        v = rows[r][c] / denom;
      g.at(static_cast<int>(r), static_cast<int>(c)) = v;
    }
  return g;
}

// Binary PGM (P5), 8- or 16-bit.
inline Grid load_pgm(const std::string& path, Spacing spacing = {}) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open file: " + path);
  std::string magic;
  in >> magic;
  if (magic != "P5") throw ParseError("not a binary PGM (P5) file: " + path);

  auto next_token = [&in, &path]() {
    std::string tok;
    while (true) {
      in >> tok;
      if (!in) throw ParseError("truncated PGM header: " + path);
      if (tok[0] == '#') { std::string rest; std::getline(in, rest); continue; }
      return tok;
    }
  };
  int w = std::stoi(next_token());
  int h = std::stoi(next_token());
  int maxval = std::stoi(next_token());
  if (w < 1 || h < 1 || maxval < 1 || maxval > 65535)
    throw ParseError("invalid PGM header: " + path);
  in.get();  // single whitespace after maxval

  const bool wide = maxval > 255;
  std::vector<uint8_t> data(static_cast<size_t>(w) * h * (wide ? 2 : 1));
  in.read(reinterpret_cast<char*>(data.data()), static_cast<std::streamsize>(data.size()));
  if (in.gcount() != static_cast<std::streamsize>(data.size()))
    throw ParseError("truncated PGM pixel data: " + path);

  Grid g(w, h, spacing);
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c) {
      size_t i = static_cast<size_t>(r) * w + c;
      double v = wide ? (data[2 * i] << 8 | data[2 * i + 1]) : data[i];
      g.at(r, c) = v / maxval;
    }
  return g;
}

inline void save_pgm(const std::string& path, const Grid& image) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open file for writing: " + path);
  out << "P5\n" << image.width() << " " << image.height() << "\n255\n";
  for (int r = 0; r < image.height(); ++r)
    for (int c = 0; c < image.width(); ++c) {
      double v = image.at(r, c);
      v = v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v);
      out.put(static_cast<char>(static_cast<uint8_t>(std::lround(v * 255.0))));
    }
  if (!out) throw IoError("PGM write failed: " + path);
}

// Dispatch on magic bytes: PNG signature or "P5".
inline Grid load_image(const std::string& path, Spacing spacing = {}) {
  std::ifstream probe(path, std::ios::binary);
  if (!probe) throw IoError("cannot open file: " + path);
  char head[2] = {0, 0};
  probe.read(head, 2);
  probe.close();
  if (head[0] == 'P' && head[1] == '5') return load_pgm(path, spacing);
  return load_png(path, spacing);
}

// Threshold-free mask load: any value > 0.5 counts as foreground.
inline BinaryMask load_mask(const std::string& path, Spacing spacing = {}) {
  Grid g = load_image(path, spacing);
  BinaryMask m(g.width(), g.height(), spacing);
  for (int r = 0; r < g.height(); ++r)
    for (int c = 0; c < g.width(); ++c)
      m.at(r, c) = g.at(r, c) > 0.5 ? 1 : 0;
  return m;
}

}  // namespace vplan
