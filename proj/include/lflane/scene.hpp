#pragma once

// Procedural road scenes rendered as light fields by per-pixel ground-plane
// ray casting, with analytic lane labels.
//
// Coordinates: X lateral (right positive), Z forward along the road from the
// ego, both in meters on the flat ground plane. The ego camera follows the road
// tangent, so the lane centre sits at X = curvature * Z^2 / 2 - lateral_offset.
// Pixel (x, y) has its centre at (x + 0.5, y + 0.5); the principal point is
// the image centre.

#include <array>
#include <cmath>
#include <string>
#include <vector>

#include "lflane/error.hpp"
#include "lflane/lightfield.hpp"

namespace lflane {

struct scene_spec {
  double lane_half_width = 1.75;
  double curvature = 0.0;  // 1/m, signed; positive bends right
  double lane_marking_width = 0.3;
  double ego_position = 0.0;  // m along the road
  double ego_speed = 1.5;     // m per frame
  double surface_albedo = 0.25;
  double marking_albedo = 0.85;
  double ego_lateral_offset = 0.0;  // m right of lane centre at ego_position = 0
  double lateral_drift = 0.0;       // lateral m per m travelled
  double dash_length = 0.0;         // dash_gap == 0 draws solid markings
  double dash_gap = 0.0;
  double view_distance = 40.0;  // markings end here
  double sky_albedo = 0.6;

  double lateral_offset() const { return ego_lateral_offset + lateral_drift * ego_position; }
  double lane_centre(double z) const { return 0.5 * curvature * z * z - lateral_offset(); }
  double left_boundary(double z) const { return lane_centre(z) - lane_half_width; }
  double right_boundary(double z) const { return lane_centre(z) + lane_half_width; }

  void validate() const {
    if (!(lane_half_width > 0)) throw usage_error("scene: lane_half_width must be > 0");
    if (!(lane_marking_width > 0)) throw usage_error("scene: lane_marking_width must be > 0");
    if (!(marking_albedo > surface_albedo))
      throw usage_error("scene: marking_albedo must exceed surface_albedo");
    for (double a : {surface_albedo, marking_albedo, sky_albedo})
      if (!(a >= 0 && a <= 1)) throw usage_error("scene: albedos must lie in [0, 1]");
    if (!(view_distance > 0)) throw usage_error("scene: view_distance must be > 0");
    if (!(std::abs(curvature) * view_distance < 1))
      throw usage_error("scene: |curvature| * view_distance must be < 1");
    if (dash_length < 0 || dash_gap < 0 || (dash_gap > 0 && !(dash_length > 0)))
      throw usage_error("scene: dash lengths must be non-negative, dash_length > 0 when dashed");
  }

  bool operator==(const scene_spec&) const = default;
};

struct camera_spec {
  double height_above_road = 3.5;  // m
  double focal_length = 40.0;      // px, for the rendered spatial resolution
  double pitch = 0.4636476090008061;  // rad, downward; atan(0.5)
  double baseline = 0.05;             // m between adjacent views
  int supersampling = 2;              // samples per pixel axis

  void validate() const {
    if (!(height_above_road > 0)) throw usage_error("camera: height_above_road must be > 0");
    if (!(focal_length > 0)) throw usage_error("camera: focal_length must be > 0");
    if (!(baseline >= 0)) throw usage_error("camera: baseline must be >= 0");
    if (!(std::abs(pitch) < 1.5707963267948966)) throw usage_error("camera: |pitch| must be < pi/2");
    if (supersampling < 1) throw usage_error("camera: supersampling must be >= 1");
  }

  bool operator==(const camera_spec&) const = default;
};

// Ground distances at which the label samples each boundary: a geometric
// progression from near to far.
struct label_depths {
  double near_distance = 4.0;
  double far_distance = 32.0;

  std::array<double, 5> distances() const {
    std::array<double, 5> d{};
    for (int k = 0; k < 5; ++k) d[k] = near_distance * std::pow(far_distance / near_distance, k / 4.0);
    return d;
  }
};

inline constexpr int label_points_per_boundary = 5;
inline constexpr int label_size = 20;

// Layout: left boundary near->far, then right boundary near->far, each point
// as interleaved (x, y) normalized by image width / height.
struct lane_label {
  std::array<double, label_size> values{};

  double x(int boundary, int k) const { return values[(boundary * label_points_per_boundary + k) * 2]; }
  double y(int boundary, int k) const { return values[(boundary * label_points_per_boundary + k) * 2 + 1]; }

  void validate() const {
    for (double v : values)
      if (!std::isfinite(v) || v < 0 || v > 1) throw data_error("lane label: value outside [0, 1]");
    for (int b = 0; b < 2; ++b)
      for (int k = 1; k < label_points_per_boundary; ++k)
        if (!(y(b, k) < y(b, k - 1))) throw data_error("lane label: y must decrease near to far");
  }

  bool operator==(const lane_label&) const = default;
};

enum class degradation_kind { none, low_light, glare, blur, marking_wear };

inline const char* to_string(degradation_kind k) {
  switch (k) {
    case degradation_kind::none: return "none";
    case degradation_kind::low_light: return "low_light";
    case degradation_kind::glare: return "glare";
    case degradation_kind::blur: return "blur";
    case degradation_kind::marking_wear: return "marking_wear";
  }
  return "none";
}

inline degradation_kind degradation_from_string(const std::string& s) {
  for (auto k : {degradation_kind::none, degradation_kind::low_light, degradation_kind::glare,
                 degradation_kind::blur, degradation_kind::marking_wear})
    if (s == to_string(k)) return k;
  throw usage_error("unknown degradation kind: " + s);
}

struct degradation_spec {
  degradation_kind kind = degradation_kind::none;
  double severity = 0.0;
  unsigned long long rng_seed = 0;
};

// ---- projection ------------------------------------------------------------

struct pixel_point {
  double x = 0;  // continuous pixel coordinates, origin at the top-left corner
  double y = 0;
  double depth = 0;  // along the optical axis
};

// Central camera at lateral 0, height h. View (u, v) is offset laterally by
// baseline * (v - c) and downward by baseline * (u - c).
inline pixel_point project_ground_point(const camera_spec& cam, int height, int width, double x_lat,
                                        double z, double cam_x = 0.0, double cam_h = -1.0) {
  const double h = cam_h < 0 ? cam.height_above_road : cam_h;
  const double sp = std::sin(cam.pitch), cp = std::cos(cam.pitch);
  const double depth = h * sp + z * cp;
  const double down = h * cp - z * sp;
  return {width / 2.0 + cam.focal_length * (x_lat - cam_x) / depth,
          height / 2.0 + cam.focal_length * down / depth, depth};
}

// Optical-axis depth of a ground point at forward distance z.
inline double ground_depth(const camera_spec& cam, double z) {
  return cam.height_above_road * std::sin(cam.pitch) + z * std::cos(cam.pitch);
}

// ---- rendering -------------------------------------------------------------

namespace detail {

inline bool on_marking(const scene_spec& s, double x_lat, double z) {
  if (z > s.view_distance || z < 0) return false;
  const double half = 0.5 * s.lane_marking_width;
  if (std::abs(x_lat - s.left_boundary(z)) > half && std::abs(x_lat - s.right_boundary(z)) > half)
    return false;
  if (s.dash_gap <= 0) return true;
  const double period = s.dash_length + s.dash_gap;
  double phase = std::fmod(s.ego_position + z, period);
  if (phase < 0) phase += period;
  return phase < s.dash_length;
}

}  // namespace detail

inline light_field render_lightfield(const scene_spec& scene, const camera_spec& cam, int angular_res,
                                     int spatial_res, int channels = 1) {
  scene.validate();
  cam.validate();
  if (angular_res < 1 || angular_res % 2 == 0)
    throw usage_error("render: angular resolution must be odd and >= 1");
  if (spatial_res < 1 || channels < 1) throw usage_error("render: spatial resolution and channels must be >= 1");

  const int n = spatial_res;
  const int c = (angular_res - 1) / 2;
  const double sp = std::sin(cam.pitch), cp = std::cos(cam.pitch);
  const double f = cam.focal_length;
  // Lowest sample of the bottom row must see the ground.
  const double y_bottom = (n - 0.5 / cam.supersampling - n / 2.0) / f;
  if (!(y_bottom * cp + sp > 0)) throw usage_error("render: degenerate camera, no ground visible in frame");
  if (cam.height_above_road - cam.baseline * c <= 0)
    throw usage_error("render: baseline too large, a view sits below the road");

  light_field lf(angular_res, n, n, channels);
  const int ss = cam.supersampling;
  const double inv = 1.0 / (ss * ss);
  std::vector<double> row_t(static_cast<std::size_t>(n) * ss), row_z(row_t.size());
  std::vector<double> col_x(static_cast<std::size_t>(n) * ss);
  for (int j = 0; j < n * ss; ++j) col_x[j] = ((j + 0.5) / ss - n / 2.0) / f;

  for (int u = 0; u < angular_res; ++u) {
    const double cam_h = cam.height_above_road - cam.baseline * (u - c);
    for (int i = 0; i < n * ss; ++i) {
      const double yc = ((i + 0.5) / ss - n / 2.0) / f;
      const double denom = yc * cp + sp;
      row_t[i] = denom > 0 ? cam_h / denom : -1.0;
      row_z[i] = row_t[i] * (cp - yc * sp);
    }
    for (int v = 0; v < angular_res; ++v) {
      const double cam_x = cam.baseline * (v - c);
      for (int y = 0; y < n; ++y) {
        for (int x = 0; x < n; ++x) {
          double acc = 0;
          for (int sy = 0; sy < ss; ++sy) {
            const int i = y * ss + sy;
            const double t = row_t[i];
            if (t < 0) {
              acc += ss * scene.sky_albedo;
              continue;
            }
            const double z = row_z[i];
            for (int sx = 0; sx < ss; ++sx) {
              const double x_lat = cam_x + t * col_x[x * ss + sx];
              acc += detail::on_marking(scene, x_lat, z) ? scene.marking_albedo : scene.surface_albedo;
            }
          }
          const float value = static_cast<float>(acc * inv);
          for (int ch = 0; ch < channels; ++ch) lf.at(u, v, y, x, ch) = value;
        }
      }
    }
  }
  return lf;
}

inline lane_label ground_truth_label(const scene_spec& scene, const camera_spec& cam, int height,
                                     int width, const label_depths& depths = {}) {
  scene.validate();
  cam.validate();
  lane_label label;
  const auto zs = depths.distances();
  for (int b = 0; b < 2; ++b) {
    for (int k = 0; k < label_points_per_boundary; ++k) {
      const double z = zs[k];
      const double x_lat = b == 0 ? scene.left_boundary(z) : scene.right_boundary(z);
      const pixel_point p = project_ground_point(cam, height, width, x_lat, z);
      const double nx = p.x / width, ny = p.y / height;
      if (!(p.depth > 0) || nx < 0 || nx > 1 || ny < 0 || ny > 1)
        throw data_error("ground_truth_label: boundary point at " + std::to_string(z) +
                         " m projects outside the frame");
      label.values[(b * label_points_per_boundary + k) * 2] = nx;
      label.values[(b * label_points_per_boundary + k) * 2 + 1] = ny;
    }
  }
  label.validate();
  return label;
}

inline scene_spec advance_ego(const scene_spec& scene) {
  scene_spec next = scene;
  next.ego_position += scene.ego_speed;
  return next;
}

}  // namespace lflane
