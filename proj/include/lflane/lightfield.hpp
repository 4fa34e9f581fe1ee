#pragma once

// Light-field data model: A x A grid of perspective views, each an H x W x C
// image of linear radiance in [0, 1], stored as 32-bit floats.

#include <cmath>
#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "lflane/container.hpp"
#include "lflane/error.hpp"

namespace lflane {

class image {
 public:
  image() = default;
  image(int height, int width, int channels, float fill = 0.0f)
      : height_(height), width_(width), channels_(channels) {
    if (height < 1 || width < 1 || channels < 1) throw data_error("image: dimensions must be >= 1");
    data_.assign(static_cast<std::size_t>(height) * width * channels, fill);
  }
  image(int height, int width, int channels, std::vector<float> data)
      : height_(height), width_(width), channels_(channels), data_(std::move(data)) {
    if (height < 1 || width < 1 || channels < 1) throw data_error("image: dimensions must be >= 1");
    if (data_.size() != static_cast<std::size_t>(height) * width * channels)
      throw data_error("image: data length does not match dimensions");
  }

  int height() const { return height_; }
  int width() const { return width_; }
  int channels() const { return channels_; }
  std::size_t size() const { return data_.size(); }

  float at(int y, int x, int c = 0) const { return data_[index(y, x, c)]; }
  float& at(int y, int x, int c = 0) { return data_[index(y, x, c)]; }

  std::span<const float> data() const { return data_; }
  std::span<float> data() { return data_; }

  bool operator==(const image&) const = default;

 private:
  std::size_t index(int y, int x, int c) const {
    return (static_cast<std::size_t>(y) * width_ + x) * channels_ + c;
  }

  int height_ = 0;
  int width_ = 0;
  int channels_ = 0;
  std::vector<float> data_;
};

class light_field {
 public:
  light_field() = default;
  light_field(int angular_res, int height, int width, int channels, float fill = 0.0f)
      : angular_(angular_res), height_(height), width_(width), channels_(channels) {
    check_dims();
    data_.assign(expected_size(), fill);
  }
  light_field(int angular_res, int height, int width, int channels, std::vector<float> data)
      : angular_(angular_res), height_(height), width_(width), channels_(channels),
        data_(std::move(data)) {
    check_dims();
    if (data_.size() != expected_size())
      throw data_error("light field: data length does not match dimensions");
  }

  int angular_res() const { return angular_; }
  int height() const { return height_; }
  int width() const { return width_; }
  int channels() const { return channels_; }
  int center() const { return (angular_ - 1) / 2; }
  std::size_t view_size() const { return static_cast<std::size_t>(height_) * width_ * channels_; }

  float at(int u, int v, int y, int x, int c = 0) const { return data_[index(u, v, y, x, c)]; }
  float& at(int u, int v, int y, int x, int c = 0) { return data_[index(u, v, y, x, c)]; }

  std::span<const float> data() const { return data_; }
  std::span<float> data() { return data_; }

  std::span<const float> view_data(int u, int v) const {
    return std::span<const float>(data_).subspan(index(u, v, 0, 0, 0), view_size());
  }
  std::span<float> view_data(int u, int v) {
    return std::span<float>(data_).subspan(index(u, v, 0, 0, 0), view_size());
  }

  bool same_shape(const light_field& o) const {
    return angular_ == o.angular_ && height_ == o.height_ && width_ == o.width_ &&
           channels_ == o.channels_;
  }

  // Throws unless A is odd and every sample is finite and in [0, 1].
  void validate() const {
    if (angular_ % 2 == 0)
      throw data_error("light field: angular resolution must be odd, got " + std::to_string(angular_));
    for (std::size_t i = 0; i < data_.size(); ++i) {
      const float s = data_[i];
      if (!std::isfinite(s) || s < 0.0f || s > 1.0f)
        throw data_error("light field: sample " + std::to_string(i) + " = " + std::to_string(s) +
                         " is not finite or outside [0, 1]");
    }
  }

  bool operator==(const light_field&) const = default;

 private:
  void check_dims() const {
    if (angular_ < 1 || height_ < 1 || width_ < 1 || channels_ < 1)
      throw data_error("light field: dimensions must be >= 1");
  }
  std::size_t expected_size() const {
    return static_cast<std::size_t>(angular_) * angular_ * view_size();
  }
  std::size_t index(int u, int v, int y, int x, int c) const {
    return (((static_cast<std::size_t>(u) * angular_ + v) * height_ + y) * width_ + x) * channels_ + c;
  }

  int angular_ = 0;
  int height_ = 0;
  int width_ = 0;
  int channels_ = 0;
  std::vector<float> data_;
};

struct light_field_sequence {
  std::vector<light_field> frames;
  double frame_interval = 1.0;
  std::string sequence_id;

  std::size_t length() const { return frames.size(); }
};

inline image extract_view(const light_field& lf, int u, int v) {
  const int a = lf.angular_res();
  if (u < 0 || v < 0 || u >= a || v >= a)
    throw data_error("extract_view: angular index (" + std::to_string(u) + ", " + std::to_string(v) +
                     ") outside [0, " + std::to_string(a) + ")");
  auto src = lf.view_data(u, v);
  return image(lf.height(), lf.width(), lf.channels(), std::vector<float>(src.begin(), src.end()));
}

inline image central_view(const light_field& lf) {
  if (lf.angular_res() % 2 == 0) throw data_error("central_view: angular resolution must be odd");
  return extract_view(lf, lf.center(), lf.center());
}

// ---- container I/O -------------------------------------------------------

inline std::size_t light_field_sample_count(const header& h) {
  h.expect("kind", "lightfield");
  h.expect("dtype", "f32");
  h.expect("layout", "uvyxc");
  const long long a = h.get_int("angular_res"), y = h.get_int("height"), x = h.get_int("width"),
                  c = h.get_int("channels");
  if (a < 1 || y < 1 || x < 1 || c < 1) throw data_error("light field header: dimensions must be >= 1");
  if (a % 2 == 0) throw data_error("light field header: angular_res must be odd");
  return static_cast<std::size_t>(a * a * y * x * c);
}

inline std::size_t image_sample_count(const header& h) {
  h.expect("dtype", "f32");
  h.expect("layout", "yxc");
  const long long y = h.get_int("height"), x = h.get_int("width"), c = h.get_int("channels");
  if (y < 1 || x < 1 || c < 1) throw data_error("image header: dimensions must be >= 1");
  return static_cast<std::size_t>(y * x * c);
}

// `extra` carries optional metadata such as sequence_id / frame_id.
inline void save_lightfield(const light_field& lf, const fs::path& path, const header& extra = {}) {
  lf.validate();
  header h;
  h.set("kind", "lightfield");
  h.set("angular_res", lf.angular_res());
  h.set("height", lf.height());
  h.set("width", lf.width());
  h.set("channels", lf.channels());
  h.set("dtype", "f32");
  h.set("layout", "uvyxc");
  for (const auto& [k, v] : extra.entries()) h.set(k, v);
  save_container<float>(path, h, lf.data());
}

inline light_field load_lightfield(const fs::path& path) {
  auto [h, values] = load_container<float>(path, &light_field_sample_count);
  light_field lf(static_cast<int>(h.get_int("angular_res")), static_cast<int>(h.get_int("height")),
                 static_cast<int>(h.get_int("width")), static_cast<int>(h.get_int("channels")),
                 std::move(values));
  lf.validate();
  return lf;
}

inline header image_header(const image& img, const std::string& kind = "image") {
  header h;
  h.set("kind", kind);
  h.set("height", img.height());
  h.set("width", img.width());
  h.set("channels", img.channels());
  h.set("dtype", "f32");
  h.set("layout", "yxc");
  return h;
}

inline void save_image(const image& img, const fs::path& path, const header& extra = {}) {
  header h = image_header(img);
  for (const auto& [k, v] : extra.entries()) h.set(k, v);
  save_container<float>(path, h, img.data());
}

inline std::pair<header, image> load_image_with_header(const fs::path& path) {
  auto [h, values] = load_container<float>(path, &image_sample_count);
  image img(static_cast<int>(h.get_int("height")), static_cast<int>(h.get_int("width")),
            static_cast<int>(h.get_int("channels")), std::move(values));
  return {h, std::move(img)};
}

inline image load_image(const fs::path& path) { return load_image_with_header(path).second; }

// ---- sequence manifests ----------------------------------------------------

// Frame and label paths are relative to the manifest's directory.
struct sequence_manifest {
  std::string sequence_id;
  double frame_interval = 1.0;
  std::vector<std::string> frames;
  std::vector<std::string> labels;
};

inline void to_json(nlohmann::json& j, const sequence_manifest& m) {
  j = nlohmann::json{{"sequence_id", m.sequence_id},
                     {"frame_interval", m.frame_interval},
                     {"frames", m.frames},
                     {"labels", m.labels}};
}

inline sequence_manifest read_sequence_manifest(const fs::path& path) {
  if (!fs::exists(path)) throw data_error("missing manifest: " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_text_file(path));
    sequence_manifest m;
    m.sequence_id = j.at("sequence_id").get<std::string>();
    m.frame_interval = j.value("frame_interval", 1.0);
    m.frames = j.at("frames").get<std::vector<std::string>>();
    if (j.contains("labels")) m.labels = j.at("labels").get<std::vector<std::string>>();
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw data_error("malformed manifest " + path.string() + ": " + e.what());
  }
}

inline light_field_sequence load_sequence(const fs::path& manifest_path) {
  const sequence_manifest m = read_sequence_manifest(manifest_path);
  if (m.frames.empty()) throw data_error("sequence manifest lists no frames: " + manifest_path.string());
  light_field_sequence seq;
  seq.sequence_id = m.sequence_id;
  seq.frame_interval = m.frame_interval;
  const fs::path dir = manifest_path.parent_path();
  for (const auto& f : m.frames) {
    light_field lf = load_lightfield(dir / f);
    if (!seq.frames.empty() && !lf.same_shape(seq.frames.front()))
      throw data_error("sequence " + m.sequence_id + ": frame " + f +
                       " has dimensions different from the first frame");
    seq.frames.push_back(std::move(lf));
  }
  return seq;
}

}  // namespace lflane
