#pragma once

// 8-bit PNG export of single images for inspection. Needs libpng at link time.

#include <png.h>

#include <cmath>
#include <cstdio>
#include <memory>
#include <vector>

#include "lflane/container.hpp"
#include "lflane/lightfield.hpp"

namespace lflane {

// value * 255 rounded half-up; values are assumed to be in [0, 1].
inline std::uint8_t to_byte(float v) {
  const double s = std::floor(static_cast<double>(v) * 255.0 + 0.5);
  return static_cast<std::uint8_t>(std::clamp(s, 0.0, 255.0));
}

inline void write_png(const image& img, const fs::path& path) {
  if (img.channels() != 1 && img.channels() != 3)
    throw usage_error("png export supports 1 or 3 channels, got " + std::to_string(img.channels()));
  fs::path tmp = path;
  tmp += ".tmp";
  std::unique_ptr<FILE, int (*)(FILE*)> fp(std::fopen(tmp.c_str(), "wb"), &std::fclose);
  if (!fp) throw data_error("cannot write " + tmp.string());
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    throw data_error("libpng initialisation failed");
  }
  std::vector<std::uint8_t> rows(img.size());
  for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = to_byte(img.data()[i]);
  std::vector<png_bytep> row_ptrs(static_cast<std::size_t>(img.height()));
  const std::size_t stride = static_cast<std::size_t>(img.width()) * img.channels();
  for (int y = 0; y < img.height(); ++y) row_ptrs[y] = rows.data() + y * stride;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw data_error("libpng failed while writing " + path.string());
  }
  png_init_io(png, fp.get());
  png_set_IHDR(png, info, img.width(), img.height(), 8, img.channels() == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_set_rows(png, info, row_ptrs.data());
  png_write_png(png, info, PNG_TRANSFORM_IDENTITY, nullptr);
  png_destroy_write_struct(&png, &info);
  fp.reset();
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw data_error("cannot move " + tmp.string() + " to " + path.string());
}

}  // namespace lflane
