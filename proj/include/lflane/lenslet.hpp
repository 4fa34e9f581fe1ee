#pragma once

// Lenslet-style 2D representation of a light field.
//
// Each m x m output cell is a macro-pixel: the same scene point (the cell's
// top-left spatial sample) seen from the m x m views nearest the central
// perspective. Output size equals the view size, so spatial resolution drops
// by m per axis in exchange for m x m angular samples.

#include <string>
#include <vector>

#include "lflane/lightfield.hpp"

namespace lflane {

inline constexpr int default_macro_size = 2;

struct view_block {
  int start = 0;
  int size = 1;

  int index(int k) const { return start + k; }
  bool contains(int i) const { return i >= start && i < start + size; }
  bool operator==(const view_block&) const = default;
};

struct lenslet_image {
  image pixels;
  int macro_size = 1;
  int view_block_start = 0;
  int source_angular_res = 1;

  bool operator==(const lenslet_image&) const = default;
};

// m consecutive angular indices per axis around the centre; for even m the
// block leans right/down of the centre.
inline view_block select_views(int angular_res, int macro_size) {
  if (angular_res < 1 || angular_res % 2 == 0)
    throw usage_error("select_views: angular resolution must be odd and >= 1");
  if (macro_size < 1 || macro_size > angular_res)
    throw usage_error("select_views: macro size " + std::to_string(macro_size) + " outside [1, " +
                      std::to_string(angular_res) + "]");
  const int c = (angular_res - 1) / 2;
  return {c - (macro_size - 1) / 2, macro_size};
}

// Drops trailing rows/columns so both spatial extents are multiples of m.
inline light_field trim_to_multiple(const light_field& lf, int m) {
  if (m < 1) throw usage_error("trim_to_multiple: macro size must be >= 1");
  const int h = lf.height() - lf.height() % m;
  const int w = lf.width() - lf.width() % m;
  if (h < 1 || w < 1) throw data_error("trim_to_multiple: views smaller than one macro-pixel");
  if (h == lf.height() && w == lf.width()) return lf;
  const int a = lf.angular_res(), ch = lf.channels();
  light_field out(a, h, w, ch);
  for (int u = 0; u < a; ++u)
    for (int v = 0; v < a; ++v)
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
          for (int c = 0; c < ch; ++c) out.at(u, v, y, x, c) = lf.at(u, v, y, x, c);
  return out;
}

inline lenslet_image lenslet_transform(const light_field& lf, int m = default_macro_size) {
  const view_block block = select_views(lf.angular_res(), m);
  if (lf.height() % m != 0 || lf.width() % m != 0)
    throw data_error("lenslet_transform: view size " + std::to_string(lf.height()) + "x" +
                     std::to_string(lf.width()) + " is not a multiple of macro size " +
                     std::to_string(m) + " (trim first)");
  const int h = lf.height(), w = lf.width(), ch = lf.channels();
  lenslet_image rep{image(h, w, ch), m, block.start, lf.angular_res()};
  for (int i = 0; i < h; ++i) {
    const int u = block.index(i % m);
    const int sy = (i / m) * m;
    for (int j = 0; j < w; ++j) {
      const int v = block.index(j % m);
      const int sx = (j / m) * m;
      for (int c = 0; c < ch; ++c) rep.pixels.at(i, j, c) = lf.at(u, v, sy, sx, c);
    }
  }
  return rep;
}

// Trims, then transforms. Preferred entry point for arbitrary view sizes.
inline lenslet_image make_lenslet(const light_field& lf, int m = default_macro_size) {
  select_views(lf.angular_res(), m);
  return lenslet_transform(trim_to_multiple(lf, m), m);
}

// Pixels (m*p + a, m*q + b): the stride-m subsample of view
// (block_start + a, block_start + b).
inline image recover_view_subgrid(const lenslet_image& rep, int a, int b) {
  const int m = rep.macro_size;
  if (a < 0 || b < 0 || a >= m || b >= m)
    throw data_error("recover_view_subgrid: offset (" + std::to_string(a) + ", " + std::to_string(b) +
                     ") outside [0, " + std::to_string(m) + ")");
  const int h = rep.pixels.height() / m, w = rep.pixels.width() / m, ch = rep.pixels.channels();
  image out(h, w, ch);
  for (int p = 0; p < h; ++p)
    for (int q = 0; q < w; ++q)
      for (int c = 0; c < ch; ++c) out.at(p, q, c) = rep.pixels.at(m * p + a, m * q + b, c);
  return out;
}

// Stride-m, top-left anchored subsample of an image.
inline image subsample(const image& img, int m) {
  const int h = img.height() / m, w = img.width() / m, ch = img.channels();
  image out(h, w, ch);
  for (int p = 0; p < h; ++p)
    for (int q = 0; q < w; ++q)
      for (int c = 0; c < ch; ++c) out.at(p, q, c) = img.at(m * p, m * q, c);
  return out;
}

inline void save_lenslet(const lenslet_image& rep, const fs::path& path) {
  header h = image_header(rep.pixels, "lenslet");
  h.set("macro_size", rep.macro_size);
  h.set("view_block_start", rep.view_block_start);
  h.set("source_angular_res", rep.source_angular_res);
  save_container<float>(path, h, rep.pixels.data());
}

inline lenslet_image load_lenslet(const fs::path& path) {
  auto [h, img] = load_image_with_header(path);
  h.expect("kind", "lenslet");
  lenslet_image rep{std::move(img), static_cast<int>(h.get_int("macro_size")),
                    static_cast<int>(h.get_int("view_block_start")),
                    static_cast<int>(h.get_int("source_angular_res"))};
  const view_block expected = select_views(rep.source_angular_res, rep.macro_size);
  if (expected.start != rep.view_block_start)
    throw data_error("lenslet header: view_block_start inconsistent with macro_size");
  if (rep.pixels.height() % rep.macro_size || rep.pixels.width() % rep.macro_size)
    throw data_error("lenslet header: dimensions not a multiple of macro_size");
  return rep;
}

}  // namespace lflane
