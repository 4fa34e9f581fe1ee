#pragma once

// Synthetic light-field road datasets: generation, on-disk manifests, splits,
// and the in-memory form consumed by training and evaluation.
//
// Tree layout:
//   <root>/dataset.json                       top-level manifest
//   <root>/seq_0000/sequence.json             frame + label lists
//   <root>/seq_0000/frame_00.lfh / .bin       light-field container
//   <root>/seq_0000/frame_00.label.json       20 floats + metadata

#include <algorithm>
#include <array>
#include <cstdint>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "lflane/checkpoint.hpp"
#include "lflane/degrade.hpp"
#include "lflane/lenslet.hpp"
#include "lflane/lightfield.hpp"
#include "lflane/neural/tensor.hpp"
#include "lflane/scene.hpp"

namespace lflane {

using json = nlohmann::json;

struct range {
  double lo = 0, hi = 0;
  double sample(std::mt19937_64& rng) const {
    if (lo == hi) return lo;
    return std::uniform_real_distribution<double>(lo, hi)(rng);
  }
};

struct scene_ranges {
  range lane_half_width{1.5, 2.0};
  range curvature{-0.006, 0.006};
  range lane_marking_width{0.25, 0.4};
  range ego_position{0.0, 100.0};
  range ego_speed{1.0, 2.0};
  range surface_albedo{0.15, 0.35};
  range marking_albedo{0.7, 0.9};
  range ego_lateral_offset{-0.4, 0.4};
  range lateral_drift{-0.01, 0.01};
  range dash_length{2.0, 4.0};
  range dash_gap{2.0, 4.0};
};

// Exactly round(degraded_fraction * T) frames per sequence are degraded, with
// severity ~ U[severity_min, severity_max] and kind drawn by weight.
struct degradation_mix {
  double degraded_fraction = 0.5;
  double severity_min = 0.5;
  double severity_max = 1.0;
  // low_light, glare, blur, marking_wear
  std::array<double, 4> weights{1.0, 1.0, 1.0, 1.0};
};

struct synth_config {
  int n_sequences = 60;
  int frames = 10;
  int angular_res = 5;
  int spatial_res = 64;
  int channels = 1;
  unsigned long long master_seed = 0;
  camera_spec camera;
  label_depths depths;
  scene_ranges scenes;
  degradation_mix degradations;

  void validate() const {
    if (n_sequences < 1) throw usage_error("synth: n_sequences must be >= 1");
    if (frames < 1) throw usage_error("synth: frames per sequence must be >= 1");
    if (angular_res < 1 || angular_res % 2 == 0) throw usage_error("synth: angular resolution must be odd");
    if (spatial_res < 1 || channels < 1) throw usage_error("synth: spatial resolution and channels must be >= 1");
    const auto& m = degradations;
    if (m.degraded_fraction < 0 || m.degraded_fraction > 1) throw usage_error("synth: degraded_fraction outside [0, 1]");
    if (m.severity_min < 0 || m.severity_max > 1 || m.severity_min > m.severity_max)
      throw usage_error("synth: severity range must satisfy 0 <= min <= max <= 1");
    if (std::any_of(m.weights.begin(), m.weights.end(), [](double w) { return w < 0; }) ||
        std::accumulate(m.weights.begin(), m.weights.end(), 0.0) <= 0)
      throw usage_error("synth: degradation weights must be non-negative with a positive sum");
    camera.validate();
  }
};

inline json to_json(const range& r) { return json::array({r.lo, r.hi}); }
inline range range_from_json(const json& j) { return {j.at(0).get<double>(), j.at(1).get<double>()}; }

inline json to_json(const scene_spec& s) {
  return json{{"lane_half_width", s.lane_half_width},   {"curvature", s.curvature},
              {"lane_marking_width", s.lane_marking_width}, {"ego_position", s.ego_position},
              {"ego_speed", s.ego_speed},               {"surface_albedo", s.surface_albedo},
              {"marking_albedo", s.marking_albedo},     {"ego_lateral_offset", s.ego_lateral_offset},
              {"lateral_drift", s.lateral_drift},       {"dash_length", s.dash_length},
              {"dash_gap", s.dash_gap},                 {"view_distance", s.view_distance},
              {"sky_albedo", s.sky_albedo}};
}

inline json to_json(const camera_spec& c) {
  return json{{"height_above_road", c.height_above_road},
              {"focal_length", c.focal_length},
              {"pitch", c.pitch},
              {"baseline", c.baseline},
              {"supersampling", c.supersampling}};
}

inline json to_json(const synth_config& c) {
  const auto& r = c.scenes;
  return json{{"n_sequences", c.n_sequences},
              {"frames", c.frames},
              {"angular_res", c.angular_res},
              {"spatial_res", c.spatial_res},
              {"channels", c.channels},
              {"master_seed", c.master_seed},
              {"camera", to_json(c.camera)},
              {"label_depths", {c.depths.near_distance, c.depths.far_distance}},
              {"scenes",
               {{"lane_half_width", to_json(r.lane_half_width)},
                {"curvature", to_json(r.curvature)},
                {"lane_marking_width", to_json(r.lane_marking_width)},
                {"ego_position", to_json(r.ego_position)},
                {"ego_speed", to_json(r.ego_speed)},
                {"surface_albedo", to_json(r.surface_albedo)},
                {"marking_albedo", to_json(r.marking_albedo)},
                {"ego_lateral_offset", to_json(r.ego_lateral_offset)},
                {"lateral_drift", to_json(r.lateral_drift)},
                {"dash_length", to_json(r.dash_length)},
                {"dash_gap", to_json(r.dash_gap)}}},
              {"degradations",
               {{"degraded_fraction", c.degradations.degraded_fraction},
                {"severity_min", c.degradations.severity_min},
                {"severity_max", c.degradations.severity_max},
                {"weights", c.degradations.weights}}}};
}

// Applies the keys present in `j` on top of `c` (config-file support).
inline void update_from_json(synth_config& c, const json& j) {
  try {
    if (j.contains("n_sequences")) c.n_sequences = j["n_sequences"].get<int>();
    if (j.contains("frames")) c.frames = j["frames"].get<int>();
    if (j.contains("angular_res")) c.angular_res = j["angular_res"].get<int>();
    if (j.contains("spatial_res")) c.spatial_res = j["spatial_res"].get<int>();
    if (j.contains("channels")) c.channels = j["channels"].get<int>();
    if (j.contains("master_seed")) c.master_seed = j["master_seed"].get<unsigned long long>();
    if (j.contains("camera")) {
      const json& cj = j["camera"];
      c.camera.height_above_road = cj.value("height_above_road", c.camera.height_above_road);
      c.camera.focal_length = cj.value("focal_length", c.camera.focal_length);
      c.camera.pitch = cj.value("pitch", c.camera.pitch);
      c.camera.baseline = cj.value("baseline", c.camera.baseline);
      c.camera.supersampling = cj.value("supersampling", c.camera.supersampling);
    }
    if (j.contains("label_depths")) {
      c.depths.near_distance = j["label_depths"].at(0).get<double>();
      c.depths.far_distance = j["label_depths"].at(1).get<double>();
    }
    if (j.contains("scenes")) {
      const json& s = j["scenes"];
      auto& r = c.scenes;
      auto upd = [&](const char* key, range& dst) {
        if (s.contains(key)) dst = range_from_json(s[key]);
      };
      upd("lane_half_width", r.lane_half_width);
      upd("curvature", r.curvature);
      upd("lane_marking_width", r.lane_marking_width);
      upd("ego_position", r.ego_position);
      upd("ego_speed", r.ego_speed);
      upd("surface_albedo", r.surface_albedo);
      upd("marking_albedo", r.marking_albedo);
      upd("ego_lateral_offset", r.ego_lateral_offset);
      upd("lateral_drift", r.lateral_drift);
      upd("dash_length", r.dash_length);
      upd("dash_gap", r.dash_gap);
    }
    if (j.contains("degradations")) {
      const json& d = j["degradations"];
      auto& m = c.degradations;
      m.degraded_fraction = d.value("degraded_fraction", m.degraded_fraction);
      m.severity_min = d.value("severity_min", m.severity_min);
      m.severity_max = d.value("severity_max", m.severity_max);
      if (d.contains("weights")) m.weights = d["weights"].get<std::array<double, 4>>();
    }
  } catch (const json::exception& e) {
    throw usage_error(std::string("synth config: ") + e.what());
  }
}

inline std::string dataset_id_for(const synth_config& c) {
  return "synth-" + hex64(fnv1a(to_json(c).dump()));
}

// ---- generation ----------------------------------------------------------------

struct synthetic_sequence {
  std::string sequence_id;
  std::vector<scene_spec> scenes;
  std::vector<light_field> frames;
  std::vector<lane_label> labels;
  std::vector<degradation_spec> degradations;
};

inline std::string sequence_name(int index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "seq_%04d", index);
  return buf;
}

namespace detail {

// Independent stream per (master_seed, sequence, frame); frame -1 is the
// sequence-level stream.
inline std::mt19937_64 stream(unsigned long long master, int sequence, int frame) {
  std::seed_seq seq{static_cast<std::uint32_t>(master), static_cast<std::uint32_t>(master >> 32),
                    static_cast<std::uint32_t>(sequence), static_cast<std::uint32_t>(frame + 1), 0x4c464cu};
  return std::mt19937_64(seq);
}

inline scene_spec sample_scene(const scene_ranges& r, std::mt19937_64& rng) {
  scene_spec s;
  s.lane_half_width = r.lane_half_width.sample(rng);
  s.curvature = r.curvature.sample(rng);
  s.lane_marking_width = r.lane_marking_width.sample(rng);
  s.ego_position = r.ego_position.sample(rng);
  s.ego_speed = r.ego_speed.sample(rng);
  s.surface_albedo = r.surface_albedo.sample(rng);
  s.marking_albedo = r.marking_albedo.sample(rng);
  s.ego_lateral_offset = r.ego_lateral_offset.sample(rng);
  s.lateral_drift = r.lateral_drift.sample(rng);
  s.dash_length = r.dash_length.sample(rng);
  s.dash_gap = r.dash_gap.sample(rng);
  return s;
}

}  // namespace detail

// Deterministic in (config, index); independent of generation order.
inline synthetic_sequence synthesize_sequence(const synth_config& cfg, int index, bool render = true) {
  cfg.validate();
  std::mt19937_64 rng = detail::stream(cfg.master_seed, index, -1);
  synthetic_sequence out;
  out.sequence_id = sequence_name(index);

  // Resample until every frame's label points stay inside the image.
  constexpr int max_attempts = 200;
  for (int attempt = 0;; ++attempt) {
    if (attempt == max_attempts)
      throw usage_error("synth: could not sample a scene whose lanes stay in frame; check scene ranges and camera");
    scene_spec s = detail::sample_scene(cfg.scenes, rng);
    s.validate();
    std::vector<scene_spec> scenes;
    std::vector<lane_label> labels;
    try {
      for (int t = 0; t < cfg.frames; ++t) {
        labels.push_back(ground_truth_label(s, cfg.camera, cfg.spatial_res, cfg.spatial_res, cfg.depths));
        scenes.push_back(s);
        s = advance_ego(s);
      }
    } catch (const data_error&) {
      continue;
    }
    out.scenes = std::move(scenes);
    out.labels = std::move(labels);
    break;
  }

  const auto& mix = cfg.degradations;
  const int n_degraded = static_cast<int>(std::lround(mix.degraded_fraction * cfg.frames));
  std::vector<int> order(cfg.frames);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<char> degraded(cfg.frames, 0);
  for (int k = 0; k < n_degraded; ++k) degraded[order[k]] = 1;

  std::discrete_distribution<int> kind_dist(mix.weights.begin(), mix.weights.end());
  for (int t = 0; t < cfg.frames; ++t) {
    std::mt19937_64 frng = detail::stream(cfg.master_seed, index, t);
    degradation_spec d;
    d.rng_seed = frng();
    if (degraded[t]) {
      d.kind = static_cast<degradation_kind>(1 + kind_dist(frng));
      d.severity = range{mix.severity_min, mix.severity_max}.sample(frng);
    }
    out.degradations.push_back(d);
    if (render) {
      light_field lf = render_lightfield(out.scenes[t], cfg.camera, cfg.angular_res, cfg.spatial_res, cfg.channels);
      out.frames.push_back(apply_degradation(lf, d));
    }
  }
  return out;
}

// ---- label files -----------------------------------------------------------------

inline void save_label(const lane_label& label, const fs::path& path, const json& meta = json::object()) {
  json j = meta;
  j["label"] = label.values;
  write_text_atomic(path, j.dump(1) + "\n");
}

inline lane_label load_label(const fs::path& path) {
  if (!fs::exists(path)) throw data_error("missing label file: " + path.string());
  try {
    const json j = json::parse(read_text_file(path));
    const auto values = j.at("label").get<std::vector<double>>();
    if (values.size() != label_size)
      throw data_error("label file " + path.string() + ": expected 20 values, found " + std::to_string(values.size()));
    lane_label l;
    std::copy(values.begin(), values.end(), l.values.begin());
    l.validate();
    return l;
  } catch (const json::exception& e) {
    throw data_error("malformed label file " + path.string() + ": " + e.what());
  }
}

// ---- manifests -------------------------------------------------------------------

struct dataset_manifest {
  std::string dataset_id;
  std::string split = "all";
  std::vector<fs::path> sequences;  // absolute paths to sequence manifests
  json config = json::object();

  std::string split_id() const {
    std::string ids;
    for (const auto& s : sequences) ids += s.parent_path().filename().string() + "/" + s.filename().string() + "\n";
    return hex64(fnv1a(ids));
  }
};

inline void write_dataset_manifest(const dataset_manifest& m, const fs::path& path) {
  const fs::path dir = fs::absolute(path).parent_path();
  json seqs = json::array();
  for (const auto& s : m.sequences) seqs.push_back(fs::relative(s, dir).generic_string());
  json j{{"dataset_id", m.dataset_id}, {"split", m.split}, {"split_id", m.split_id()}, {"sequences", seqs}};
  if (!m.config.empty()) j["config"] = m.config;
  write_text_atomic(path, j.dump(1) + "\n");
}

inline dataset_manifest read_dataset_manifest(const fs::path& path) {
  if (!fs::exists(path)) throw data_error("missing dataset manifest: " + path.string());
  try {
    const json j = json::parse(read_text_file(path));
    dataset_manifest m;
    m.dataset_id = j.at("dataset_id").get<std::string>();
    m.split = j.value("split", "all");
    if (j.contains("config")) m.config = j["config"];
    const fs::path dir = fs::absolute(path).parent_path();
    for (const auto& s : j.at("sequences")) m.sequences.push_back((dir / s.get<std::string>()).lexically_normal());
    return m;
  } catch (const json::exception& e) {
    throw data_error("malformed dataset manifest " + path.string() + ": " + e.what());
  }
}

inline fs::path generate_dataset(const synth_config& cfg, const fs::path& out_dir) {
  cfg.validate();
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec || !fs::is_directory(out_dir)) throw data_error("cannot create output directory " + out_dir.string());

  dataset_manifest top;
  top.dataset_id = dataset_id_for(cfg);
  top.config = to_json(cfg);
  for (int i = 0; i < cfg.n_sequences; ++i) {
    synthetic_sequence seq = synthesize_sequence(cfg, i);
    const fs::path dir = out_dir / seq.sequence_id;
    fs::create_directories(dir, ec);
    if (ec) throw data_error("cannot create " + dir.string());
    sequence_manifest sm;
    sm.sequence_id = seq.sequence_id;
    for (int t = 0; t < cfg.frames; ++t) {
      char name[32];
      std::snprintf(name, sizeof name, "frame_%02d", t);
      header extra;
      extra.set("sequence_id", seq.sequence_id);
      extra.set("frame_id", t);
      save_lightfield(seq.frames[t], dir / (std::string(name) + ".lfh"), extra);
      json meta{{"sequence_id", seq.sequence_id},
                {"frame_index", t},
                {"scene", to_json(seq.scenes[t])},
                {"degradation",
                 {{"kind", to_string(seq.degradations[t].kind)},
                  {"severity", seq.degradations[t].severity},
                  {"rng_seed", seq.degradations[t].rng_seed}}}};
      save_label(seq.labels[t], dir / (std::string(name) + ".label.json"), meta);
      sm.frames.push_back(std::string(name) + ".lfh");
      sm.labels.push_back(std::string(name) + ".label.json");
    }
    json j = sm;
    write_text_atomic(dir / "sequence.json", j.dump(1) + "\n");
    top.sequences.push_back(fs::absolute(dir / "sequence.json"));
  }
  const fs::path manifest = out_dir / "dataset.json";
  write_dataset_manifest(top, manifest);
  return manifest;
}

// ---- splits ----------------------------------------------------------------------

struct split_sizes {
  std::size_t train = 0, test = 0;
};

// floor(fraction * n) training sequences; the epsilon absorbs representation
// error such as 0.7 * 10 = 6.9999...
inline split_sizes split_counts(std::size_t n, double train_fraction) {
  if (!(train_fraction > 0 && train_fraction < 1)) throw usage_error("split: train fraction must lie in (0, 1)");
  const auto n_train = static_cast<std::size_t>(std::floor(train_fraction * static_cast<double>(n) + 1e-9));
  if (n_train == 0 || n_train >= n)
    throw usage_error("split: fraction " + std::to_string(train_fraction) + " of " + std::to_string(n) +
                      " sequences leaves one side empty");
  return {n_train, n - n_train};
}

// Seeded shuffle at sequence granularity; each side keeps manifest order.
inline std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_indices(std::size_t n, double train_fraction,
                                                                                   unsigned long long seed) {
  if (n < 2) throw usage_error("split: need at least 2 sequences");
  const split_sizes sz = split_counts(n, train_fraction);
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(idx.begin(), idx.end(), rng);
  std::vector<std::size_t> train(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(sz.train));
  std::vector<std::size_t> test(idx.begin() + static_cast<std::ptrdiff_t>(sz.train), idx.end());
  std::sort(train.begin(), train.end());
  std::sort(test.begin(), test.end());
  return {train, test};
}

inline std::pair<dataset_manifest, dataset_manifest> split_dataset(const dataset_manifest& all, double train_fraction,
                                                                   unsigned long long seed) {
  auto [tr, te] = split_indices(all.sequences.size(), train_fraction, seed);
  dataset_manifest train{all.dataset_id, "train", {}, all.config};
  dataset_manifest test{all.dataset_id, "test", {}, all.config};
  for (auto i : tr) train.sequences.push_back(all.sequences[i]);
  for (auto i : te) test.sequences.push_back(all.sequences[i]);
  return {train, test};
}

// ---- in-memory form --------------------------------------------------------------

struct sequence_data {
  std::string sequence_id;
  std::vector<nn::tensor> central;  // 1 x C x H x W per frame
  std::vector<nn::tensor> lenslet;
  std::vector<lane_label> labels;
};

struct dataset {
  std::string dataset_id;
  std::string split_id;
  int height = 0, width = 0, channels = 0;
  int macro_size = default_macro_size;
  std::vector<sequence_data> sequences;
};

inline nn::tensor image_to_tensor(const image& img) {
  const auto c = static_cast<std::size_t>(img.channels()), h = static_cast<std::size_t>(img.height()),
             w = static_cast<std::size_t>(img.width());
  nn::tensor t({1, c, h, w});
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x)
      for (std::size_t ch = 0; ch < c; ++ch) t.at(0, ch, y, x) = img.at(static_cast<int>(y), static_cast<int>(x), static_cast<int>(ch));
  return t;
}

// Both representations are trimmed to a multiple of lcm(m, 8) so the backbone
// sees identical input sizes for every modality.
inline int model_extent(int extent, int macro_size) {
  const int step = std::lcm(macro_size, 8);
  return extent - extent % step;
}

inline sequence_data to_sequence_data(std::string id, const std::vector<light_field>& frames,
                                      std::vector<lane_label> labels, int macro_size) {
  sequence_data s;
  s.sequence_id = std::move(id);
  s.labels = std::move(labels);
  for (const auto& lf : frames) {
    const int h = model_extent(lf.height(), macro_size), w = model_extent(lf.width(), macro_size);
    if (h < 8 || w < 8) throw data_error("views too small for the backbone after trimming");
    const int step = std::lcm(macro_size, 8);
    const light_field trimmed = (h == lf.height() && w == lf.width()) ? lf : trim_to_multiple(lf, step);
    s.central.push_back(image_to_tensor(central_view(trimmed)));
    s.lenslet.push_back(image_to_tensor(lenslet_transform(trimmed, macro_size).pixels));
  }
  return s;
}

inline dataset load_dataset(const dataset_manifest& m, int macro_size = default_macro_size) {
  dataset d;
  d.dataset_id = m.dataset_id;
  d.split_id = m.split_id();
  d.macro_size = macro_size;
  for (const auto& path : m.sequences) {
    const sequence_manifest sm = read_sequence_manifest(path);
    if (sm.labels.size() != sm.frames.size())
      throw data_error("sequence " + sm.sequence_id + ": every frame needs a label file");
    light_field_sequence seq = load_sequence(path);
    std::vector<lane_label> labels;
    for (const auto& l : sm.labels) labels.push_back(load_label(path.parent_path() / l));
    d.sequences.push_back(to_sequence_data(sm.sequence_id, seq.frames, std::move(labels), macro_size));
  }
  if (d.sequences.empty()) throw data_error("dataset has no sequences");
  const auto& f = d.sequences.front().central.front();
  d.channels = static_cast<int>(f.dim(1));
  d.height = static_cast<int>(f.dim(2));
  d.width = static_cast<int>(f.dim(3));
  return d;
}

// Renders straight into memory; used by benchmarks that never touch disk.
inline dataset synthesize_in_memory(const synth_config& cfg, int macro_size = default_macro_size) {
  dataset d;
  d.dataset_id = dataset_id_for(cfg);
  d.macro_size = macro_size;
  for (int i = 0; i < cfg.n_sequences; ++i) {
    synthetic_sequence seq = synthesize_sequence(cfg, i);
    d.sequences.push_back(to_sequence_data(seq.sequence_id, seq.frames, std::move(seq.labels), macro_size));
  }
  const auto& f = d.sequences.front().central.front();
  d.channels = static_cast<int>(f.dim(1));
  d.height = static_cast<int>(f.dim(2));
  d.width = static_cast<int>(f.dim(3));
  return d;
}

inline dataset subset(const dataset& d, const std::vector<std::size_t>& indices) {
  dataset out = d;
  out.sequences.clear();
  std::string ids;
  for (auto i : indices) {
    out.sequences.push_back(d.sequences.at(i));
    ids += d.sequences[i].sequence_id + "/sequence.json\n";
  }
  out.split_id = hex64(fnv1a(ids));
  return out;
}

}  // namespace lflane
