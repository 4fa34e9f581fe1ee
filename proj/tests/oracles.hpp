#pragma once

// Test-side reference computations, written independently of the library.

#include <array>
#include <cmath>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "lflane/lightfield.hpp"

namespace oracle {

// Every sample of view (u, v) holds 10u + v (scaled into [0, 1] when `scale`).
inline lflane::light_field constant_coded(int a, int s, double scale = 1.0) {
  lflane::light_field lf(a, s, s, 1);
  for (int u = 0; u < a; ++u)
    for (int v = 0; v < a; ++v)
      for (int y = 0; y < s; ++y)
        for (int x = 0; x < s; ++x) lf.at(u, v, y, x) = static_cast<float>((10 * u + v) * scale);
  return lf;
}

inline lflane::light_field random_field(int a, int h, int w, int c, unsigned long long seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> d(0.0f, 1.0f);
  lflane::light_field lf(a, h, w, c);
  for (float& v : lf.data()) v = d(rng);
  return lf;
}

// Contiguous block of m indices in [0, a) minimizing summed distance to the
// centre; ties go to the block that starts at the centre or later.
inline int nearest_block_start(int a, int m) {
  const int c = (a - 1) / 2;
  int best = -1;
  double best_cost = 1e300;
  for (int s = 0; s + m <= a; ++s) {
    double cost = 0;
    for (int k = 0; k < m; ++k) cost += std::abs(s + k - c);
    const bool better = cost < best_cost - 1e-12 || (std::abs(cost - best_cost) < 1e-12 && s <= c && best < s);
    if (better) {
      best_cost = cost;
      best = s;
    }
  }
  return best;
}

// Pinhole disparity between horizontally adjacent views for a ground point
// at forward distance z: f * b / depth, depth measured along the optical axis
// of a camera at height h pitched down by theta.
inline double ground_disparity(double f, double b, double h, double theta, double z) {
  const double depth = h * std::sin(theta) + z * std::cos(theta);
  return f * b / depth;
}

// Image row of a ground point at forward distance z (continuous, top-left origin).
inline double ground_row(double f, double h, double theta, int height, double z) {
  const double depth = h * std::sin(theta) + z * std::cos(theta);
  const double down = h * std::cos(theta) - z * std::sin(theta);
  return height / 2.0 + f * down / depth;
}

// Least-squares line through points; returns the largest perpendicular residual.
inline double line_fit_residual(const std::vector<std::array<double, 2>>& pts) {
  double mx = 0, my = 0;
  for (auto& p : pts) mx += p[0], my += p[1];
  mx /= pts.size();
  my /= pts.size();
  double sxx = 0, syy = 0, sxy = 0;
  for (auto& p : pts) {
    sxx += (p[0] - mx) * (p[0] - mx);
    syy += (p[1] - my) * (p[1] - my);
    sxy += (p[0] - mx) * (p[1] - my);
  }
  // Principal direction of the scatter matrix.
  const double angle = 0.5 * std::atan2(2 * sxy, sxx - syy);
  const double nx = -std::sin(angle), ny = std::cos(angle);
  double worst = 0;
  for (auto& p : pts) worst = std::max(worst, std::abs((p[0] - mx) * nx + (p[1] - my) * ny));
  return worst;
}

struct temp_dir {
  std::filesystem::path path;
  explicit temp_dir(const std::string& tag) {
    path = std::filesystem::temp_directory_path() /
           ("lflane_" + tag + "_" + std::to_string(std::random_device{}()));
    std::filesystem::create_directories(path);
  }
  ~temp_dir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
  }
  std::filesystem::path operator/(const std::string& name) const { return path / name; }
};

}  // namespace oracle

namespace oracle {

// Optical-axis depth of the ground point seen through the centre of image row
// `row`, for a camera at height h pitched down by theta.
inline double row_depth(double f, double h, double theta, int height, int row) {
  const double yc = (row + 0.5 - height / 2.0) / f;
  return h / (yc * std::cos(theta) + std::sin(theta));
}

// Brightness-weighted centroid of samples above `floor` within columns [x0, x1).
inline double row_centroid(const lflane::image& img, int row, int x0, int x1, double floor) {
  double wsum = 0, xsum = 0;
  for (int x = x0; x < x1; ++x) {
    const double w = std::max(0.0, img.at(row, x) - floor);
    wsum += w;
    xsum += w * (x + 0.5);
  }
  return wsum > 0 ? xsum / wsum : -1.0;
}

}  // namespace oracle
