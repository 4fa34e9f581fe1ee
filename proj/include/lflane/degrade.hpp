#pragma once

// Challenging-condition emulation on rendered light fields. Output is always
// clamped to [0, 1]; severity 0 or kind none returns the input unchanged.
//
//   low_light     v' = (1 - 0.8 s) v + N(0, (0.02 s)^2), noise independent per sample
//   glare         per view, 1 + floor(3 s) flare disks of radius (0.10 + 0.15 s) min(H, W)
//                 adding 1.5 s (1 - (d / r)^2); disk centres drawn independently per view,
//                 since stray light reaches each sub-aperture differently
//   blur          separable Gaussian, sigma = 2.5 s px, clamp-to-edge, same for every view
//   marking_wear  3 horizontal bands of height round(s H / 3) at the same rows in every
//                 view; inside them samples brighter than the view median m become
//                 m + (v - m)(1 - 0.9 s)

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "lflane/lightfield.hpp"
#include "lflane/scene.hpp"

namespace lflane {

namespace degradation_constants {
inline constexpr double low_light_gain_slope = 0.8;
inline constexpr double low_light_noise_sigma = 0.02;
inline constexpr double glare_radius_base = 0.10;
inline constexpr double glare_radius_slope = 0.15;
inline constexpr double glare_peak = 1.5;
inline constexpr double blur_sigma_px = 2.5;
inline constexpr int wear_bands = 3;
inline constexpr double wear_contrast_loss = 0.9;
}  // namespace degradation_constants

namespace detail {

inline float clamp01(double v) { return static_cast<float>(std::clamp(v, 0.0, 1.0)); }

inline void blur_view(std::span<float> view, int h, int w, int ch, double sigma) {
  const int radius = static_cast<int>(std::ceil(3 * sigma));
  std::vector<double> kernel(2 * radius + 1);
  double sum = 0;
  for (int k = -radius; k <= radius; ++k) sum += kernel[k + radius] = std::exp(-0.5 * k * k / (sigma * sigma));
  for (auto& k : kernel) k /= sum;
  std::vector<double> tmp(view.size());
  auto idx = [&](int y, int x, int c) { return (static_cast<std::size_t>(y) * w + x) * ch + c; };
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < ch; ++c) {
        double acc = 0;
        for (int k = -radius; k <= radius; ++k) acc += kernel[k + radius] * view[idx(y, std::clamp(x + k, 0, w - 1), c)];
        tmp[idx(y, x, c)] = acc;
      }
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < ch; ++c) {
        double acc = 0;
        for (int k = -radius; k <= radius; ++k) acc += kernel[k + radius] * tmp[idx(std::clamp(y + k, 0, h - 1), x, c)];
        view[idx(y, x, c)] = clamp01(acc);
      }
}

inline float channel_median(std::span<const float> view, int ch, int c) {
  std::vector<float> vals;
  vals.reserve(view.size() / ch);
  for (std::size_t i = c; i < view.size(); i += ch) vals.push_back(view[i]);
  auto mid = vals.begin() + vals.size() / 2;
  std::nth_element(vals.begin(), mid, vals.end());
  return *mid;
}

}  // namespace detail

inline light_field apply_degradation(const light_field& lf, const degradation_spec& spec) {
  if (!(spec.severity >= 0 && spec.severity <= 1)) throw usage_error("degradation severity must lie in [0, 1]");
  if (spec.kind == degradation_kind::none || spec.severity == 0) return lf;

  namespace k = degradation_constants;
  const double s = spec.severity;
  const int a = lf.angular_res(), h = lf.height(), w = lf.width(), ch = lf.channels();
  light_field out = lf;
  std::mt19937_64 rng(spec.rng_seed);

  switch (spec.kind) {
    case degradation_kind::low_light: {
      const double gain = 1 - k::low_light_gain_slope * s;
      std::normal_distribution<double> noise(0.0, k::low_light_noise_sigma * s);
      for (float& v : out.data()) v = detail::clamp01(gain * v + noise(rng));
      break;
    }
    case degradation_kind::glare: {
      const int n_disks = 1 + static_cast<int>(std::floor(3 * s));
      const double r = (k::glare_radius_base + k::glare_radius_slope * s) * std::min(h, w);
      std::uniform_real_distribution<double> ys(0.0, h), xs(0.0, w);
      for (int u = 0; u < a; ++u)
        for (int v = 0; v < a; ++v) {
          std::vector<std::pair<double, double>> centres(n_disks);
          for (auto& cxy : centres) cxy = {ys(rng), xs(rng)};
          auto view = out.view_data(u, v);
          for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
              double add = 0;
              for (const auto& [cy, cx] : centres) {
                const double dy = y + 0.5 - cy, dx = x + 0.5 - cx;
                const double q = (dy * dy + dx * dx) / (r * r);
                if (q < 1) add += k::glare_peak * s * (1 - q);
              }
              if (add == 0) continue;
              for (int c = 0; c < ch; ++c) {
                float& px = view[(static_cast<std::size_t>(y) * w + x) * ch + c];
                px = detail::clamp01(px + add);
              }
            }
        }
      break;
    }
    case degradation_kind::blur: {
      const double sigma = k::blur_sigma_px * s;
      for (int u = 0; u < a; ++u)
        for (int v = 0; v < a; ++v) detail::blur_view(out.view_data(u, v), h, w, ch, sigma);
      break;
    }
    case degradation_kind::marking_wear: {
      const int band = static_cast<int>(std::lround(s * h / k::wear_bands));
      std::vector<char> worn(h, 0);
      if (band > 0) {
        std::uniform_int_distribution<int> start(0, h - band);
        for (int b = 0; b < k::wear_bands; ++b) {
          const int y0 = start(rng);
          std::fill(worn.begin() + y0, worn.begin() + y0 + band, 1);
        }
      }
      const double keep = 1 - k::wear_contrast_loss * s;
      for (int u = 0; u < a; ++u)
        for (int v = 0; v < a; ++v) {
          auto view = out.view_data(u, v);
          for (int c = 0; c < ch; ++c) {
            const float med = detail::channel_median(lf.view_data(u, v), ch, c);
            for (int y = 0; y < h; ++y) {
              if (!worn[y]) continue;
              for (int x = 0; x < w; ++x) {
                float& px = view[(static_cast<std::size_t>(y) * w + x) * ch + c];
                if (px > med) px = detail::clamp01(med + (px - med) * keep);
              }
            }
          }
        }
      break;
    }
    case degradation_kind::none:
      break;
  }
  return out;
}

}  // namespace lflane
