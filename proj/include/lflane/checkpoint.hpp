#pragma once

// Checkpoint = text header (architecture, array shapes, step counter, RNG
// state) + flat little-endian f64 blob of every parameter array in
// model_params::arrays() order.

#include <cstdint>
#include <iomanip>
#include <sstream>
#include <string>

#include "lflane/container.hpp"
#include "lflane/model.hpp"

namespace lflane {

struct checkpoint {
  model_config config;
  model_params params;
  long long step = 0;
  std::string rng_state;  // std::mt19937_64 stream state, empty if unknown
  std::string dataset_id;
  unsigned long long seed = 0;

  bool operator==(const checkpoint&) const = default;
};

inline std::uint64_t fnv1a(std::string_view bytes, std::uint64_t h = 1469598103934665603ull) {
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << v;
  return os.str();
}

inline std::vector<double> flatten_params(const model_params& p) {
  std::vector<double> flat;
  flat.reserve(p.parameter_count());
  for (auto& [name, t] : p.arrays()) flat.insert(flat.end(), t->data().begin(), t->data().end());
  return flat;
}

// Content hash of the parameters; identifies a checkpoint in reports.
inline std::string checkpoint_id(const checkpoint& c) {
  const std::vector<double> flat = flatten_params(c.params);
  std::vector<char> bytes = encode_blob<double>(flat);
  return hex64(fnv1a(std::string_view(bytes.data(), bytes.size())));
}

inline void save_checkpoint(const checkpoint& c, const fs::path& path) {
  header h;
  h.set("kind", "checkpoint");
  h.set("modality", to_string(c.config.kind));
  h.set("input_height", c.config.input_height);
  h.set("input_width", c.config.input_width);
  h.set("input_channels", c.config.input_channels);
  h.set("conv_widths", std::to_string(c.config.conv_widths[0]) + "," + std::to_string(c.config.conv_widths[1]) +
                           "," + std::to_string(c.config.conv_widths[2]));
  h.set("feature_dim", c.config.feature_dim);
  std::string arrays;
  for (auto& [name, t] : c.params.arrays()) arrays += (arrays.empty() ? "" : ";") + name + ":" + nn::shape_string(t->shape());
  h.set("arrays", arrays);
  h.set("parameter_count", c.params.parameter_count());
  h.set("dtype", "f64");
  h.set("step", c.step);
  h.set("seed", c.seed);
  h.set("dataset_id", c.dataset_id.empty() ? "-" : c.dataset_id);
  h.set("rng_state", c.rng_state.empty() ? "-" : c.rng_state);
  const std::vector<double> flat = flatten_params(c.params);
  save_container<double>(path, h, flat);
}

inline checkpoint load_checkpoint(const fs::path& path) {
  auto count = [](const header& h) -> std::size_t {
    h.expect("kind", "checkpoint");
    h.expect("dtype", "f64");
    const long long n = h.get_int("parameter_count");
    if (n < 1) throw data_error("checkpoint: parameter_count must be positive");
    return static_cast<std::size_t>(n);
  };
  auto [h, flat] = load_container<double>(path, +count);
  checkpoint c;
  c.config.kind = modality_from_string(h.get("modality"));
  c.config.input_height = static_cast<int>(h.get_int("input_height"));
  c.config.input_width = static_cast<int>(h.get_int("input_width"));
  c.config.input_channels = static_cast<int>(h.get_int("input_channels"));
  {
    std::istringstream ws(h.get("conv_widths"));
    std::string part;
    for (int l = 0; l < 3; ++l) {
      if (!std::getline(ws, part, ',')) throw data_error("checkpoint: conv_widths needs 3 entries");
      c.config.conv_widths[l] = std::stoi(part);
    }
  }
  c.config.feature_dim = static_cast<int>(h.get_int("feature_dim"));
  c.params = allocate_model(c.config);
  std::string arrays;
  for (auto& [name, t] : c.params.arrays()) arrays += (arrays.empty() ? "" : ";") + name + ":" + nn::shape_string(t->shape());
  if (arrays != h.get("arrays")) throw data_error("checkpoint: array layout does not match the declared architecture");
  if (flat.size() != c.params.parameter_count()) throw data_error("checkpoint: parameter count mismatch");
  std::size_t off = 0;
  for (auto& [name, t] : c.params.arrays()) {
    std::copy(flat.begin() + static_cast<std::ptrdiff_t>(off),
              flat.begin() + static_cast<std::ptrdiff_t>(off + t->size()), t->data().begin());
    off += t->size();
  }
  c.step = h.get_int("step");
  c.seed = std::stoull(h.get("seed"));
  c.dataset_id = h.get("dataset_id") == "-" ? "" : h.get("dataset_id");
  c.rng_state = h.get("rng_state") == "-" ? "" : h.get("rng_state");
  return c;
}

}  // namespace lflane
