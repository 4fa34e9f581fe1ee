// lflane: command-line front end for synthesis, lenslet conversion, training,
// evaluation, comparison and gradient checks. Every subcommand prints one JSON
// document on stdout. Exit status: 0 ok, 1 usage, 2 data, 3 numerical.

#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "lflane/checkpoint.hpp"
#include "lflane/dataset.hpp"
#include "lflane/eval.hpp"
#include "lflane/gradcheck_suite.hpp"
#include "lflane/lenslet.hpp"
#include "lflane/png.hpp"
#include "lflane/train.hpp"

using namespace lflane;
using nlohmann::json;

namespace {

struct globals {
  std::optional<unsigned long long> seed;
  std::string config;
  std::string out_dir;
};

json load_config(const std::string& path) {
  if (path.empty()) return json::object();
  if (!fs::exists(path)) throw usage_error("config file not found: " + path);
  try {
    return json::parse(read_text_file(path));
  } catch (const json::exception& e) {
    throw usage_error("config file " + path + " is not valid JSON: " + e.what());
  }
}

fs::path require_out_dir(const globals& g) {
  if (g.out_dir.empty()) throw usage_error("--out-dir is required");
  std::error_code ec;
  fs::create_directories(g.out_dir, ec);
  if (!fs::is_directory(g.out_dir)) throw data_error("cannot create output directory " + g.out_dir);
  return fs::path(g.out_dir);
}

void print(const json& j) { std::cout << j.dump(2) << std::endl; }

// ---- synth ------------------------------------------------------------------------

struct synth_args {
  std::optional<int> sequences, frames, angular, spatial, channels;
  std::optional<double> baseline, focal, degraded_fraction;
};

int run_synth(const globals& g, const synth_args& a) {
  synth_config cfg;
  update_from_json(cfg, load_config(g.config));
  if (a.sequences) cfg.n_sequences = *a.sequences;
  if (a.frames) cfg.frames = *a.frames;
  if (a.angular) cfg.angular_res = *a.angular;
  if (a.spatial) cfg.spatial_res = *a.spatial;
  if (a.channels) cfg.channels = *a.channels;
  if (a.baseline) cfg.camera.baseline = *a.baseline;
  if (a.focal) cfg.camera.focal_length = *a.focal;
  if (a.degraded_fraction) cfg.degradations.degraded_fraction = *a.degraded_fraction;
  if (g.seed) cfg.master_seed = *g.seed;
  cfg.validate();
  const fs::path out = require_out_dir(g);
  const fs::path manifest = generate_dataset(cfg, out);
  print({{"command", "synth"},
         {"manifest", fs::absolute(manifest).string()},
         {"dataset_id", dataset_id_for(cfg)},
         {"sequences", cfg.n_sequences},
         {"frames_per_sequence", cfg.frames},
         {"light_fields", cfg.n_sequences * cfg.frames}});
  return 0;
}

// ---- lenslet ----------------------------------------------------------------------

int run_lenslet(int macro, const std::string& in, const std::string& out) {
  const light_field lf = load_lightfield(in);
  const lenslet_image rep = make_lenslet(lf, macro);
  save_lenslet(rep, out);
  print({{"command", "lenslet"},
         {"input", in},
         {"output", out},
         {"macro_size", rep.macro_size},
         {"view_block_start", rep.view_block_start},
         {"height", rep.pixels.height()},
         {"width", rep.pixels.width()},
         {"trimmed", rep.pixels.height() != lf.height() || rep.pixels.width() != lf.width()}});
  return 0;
}

// ---- train ------------------------------------------------------------------------

struct train_args {
  std::string data, modality;
  std::optional<int> epochs, batch_size, macro, decay_every, feature_dim;
  std::optional<double> lr, decay, train_fraction;
  std::optional<unsigned long long> split_seed;
  bool validate_on_test = false;
};

int run_train(const globals& g, const train_args& a) {
  const json file = load_config(g.config);
  train_config cfg;
  update_from_json(cfg, file);
  if (a.epochs) cfg.epochs = *a.epochs;
  if (a.batch_size) cfg.batch_size = *a.batch_size;
  if (a.macro) cfg.macro_size = *a.macro;
  if (a.lr) cfg.schedule.base_lr = *a.lr;
  if (a.decay) cfg.schedule.decay_factor = *a.decay;
  if (a.decay_every) cfg.schedule.decay_every = *a.decay_every;
  if (a.feature_dim) cfg.feature_dim = *a.feature_dim;
  if (a.train_fraction) cfg.train_fraction = *a.train_fraction;
  if (g.seed) cfg.seed = *g.seed;
  cfg.validate();
  const unsigned long long split_seed = a.split_seed ? *a.split_seed : file.value("split_seed", cfg.seed);
  std::string mod_name = a.modality.empty() ? file.value("modality", std::string()) : a.modality;
  if (mod_name.empty()) throw usage_error("train: --modality is required");
  const modality m = modality_from_string(mod_name);
  if (a.data.empty()) throw usage_error("train: --data is required");
  const fs::path out = require_out_dir(g);

  const dataset_manifest all = read_dataset_manifest(a.data);
  auto [train_m, test_m] = split_dataset(all, cfg.train_fraction, split_seed);
  const dataset train_set = load_dataset(train_m, cfg.macro_size);
  const dataset test_set = load_dataset(test_m, cfg.macro_size);
  const train_result r = train(train_set, a.validate_on_test ? &test_set : nullptr, m, cfg);

  // Everything is computed before anything is written.
  json snapshot = to_json(cfg);
  snapshot["modality"] = to_string(m);
  snapshot["data"] = fs::absolute(a.data).string();
  snapshot["split_seed"] = split_seed;
  write_dataset_manifest(train_m, out / "train_split.json");
  write_dataset_manifest(test_m, out / "test_split.json");
  write_text_atomic(out / "history.csv", history_csv(r.history));
  save_checkpoint(r.model, out / "model.ckpt");
  write_text_atomic(out / "config.json", snapshot.dump(2) + "\n");
  print({{"command", "train"},
         {"modality", to_string(m)},
         {"checkpoint", fs::absolute(out / "model.ckpt").string()},
         {"checkpoint_id", checkpoint_id(r.model)},
         {"test_split", fs::absolute(out / "test_split.json").string()},
         {"train_sequences", train_m.sequences.size()},
         {"test_sequences", test_m.sequences.size()},
         {"parameters", r.model.params.parameter_count()},
         {"steps", r.model.step},
         {"initial_train_loss", r.history.front().train_loss},
         {"final_train_loss", r.history.back().train_loss}});
  return 0;
}

// ---- evaluate ---------------------------------------------------------------------

int run_evaluate(const globals& g, const std::string& ckpt_path, const std::string& data,
                 const std::string& mod_name, double pixel_scale) {
  const checkpoint ckpt = load_checkpoint(ckpt_path);
  const modality m = mod_name.empty() ? ckpt.config.kind : modality_from_string(mod_name);
  const json file = load_config(g.config);
  const int macro = file.value("macro_size", default_macro_size);
  const dataset test = load_dataset(read_dataset_manifest(data), macro);
  eval_report rep = evaluate(ckpt, test, m);
  rep.pixel_scale = pixel_scale;
  const json j = to_json(rep);
  if (!g.out_dir.empty()) {
    const fs::path out = require_out_dir(g);
    write_text_atomic(out / "per_sample.csv", per_sample_csv(rep));
    write_text_atomic(out / "report.json", j.dump(2) + "\n");
  }
  json printed = j;
  printed["command"] = "evaluate";
  printed.erase("per_sample_mse");
  printed.erase("sample_ids");
  print(printed);
  return 0;
}

// ---- compare ----------------------------------------------------------------------

int run_compare(const globals& g, const std::vector<std::string>& paths) {
  std::vector<eval_report> reports;
  for (const auto& p : paths) {
    if (!fs::exists(p)) throw data_error("missing report: " + p);
    json j;
    try {
      j = json::parse(read_text_file(p));
    } catch (const json::exception& e) {
      throw data_error("report " + p + " is not valid JSON: " + e.what());
    }
    reports.push_back(eval_report_from_json(j));
  }
  const comparison_table t = compare(reports);
  const json j = to_json(t);
  if (!g.out_dir.empty()) {
    const fs::path out = require_out_dir(g);
    write_text_atomic(out / "comparison.csv", comparison_csv(t));
    write_text_atomic(out / "comparison.svg", comparison_svg(t));
    write_text_atomic(out / "comparison.json", j.dump(2) + "\n");
  }
  json printed = j;
  printed["command"] = "compare";
  print(printed);
  return 0;
}

// ---- gradcheck --------------------------------------------------------------------

int run_gradcheck(const globals& g, std::vector<unsigned long long> seeds, double h, double tol) {
  if (seeds.empty()) seeds = g.seed ? std::vector<unsigned long long>{*g.seed} : std::vector<unsigned long long>{1, 2, 3};
  const auto cases = run_gradcheck_suite(seeds, h);
  json rows = json::array();
  std::map<std::string, double> worst;
  bool ok = true;
  for (const auto& c : cases) {
    json entries = json::object();
    for (const auto& e : c.report.entries) entries[e.name] = e.max_rel_error;
    rows.push_back({{"check", c.name}, {"seed", c.seed}, {"max_rel_error", c.report.max_rel_error()}, {"arrays", entries}});
    worst[c.name] = std::max(worst[c.name], c.report.max_rel_error());
    ok = ok && c.report.passed(tol);
  }
  print({{"command", "gradcheck"},
         {"h", h},
         {"tolerance", tol},
         {"seeds", seeds},
         {"max_rel_error_per_check", worst},
         {"cases", rows},
         {"passed", ok}});
  return ok ? 0 : static_cast<int>(exit_code::numerical);
}

// ---- view -------------------------------------------------------------------------

int run_view(const std::string& in, const std::string& out, std::optional<int> u, std::optional<int> v) {
  const header h = header::parse(read_text_file(in));
  image img;
  std::string what;
  if (h.has("kind") && h.get("kind") == "lightfield") {
    const light_field lf = load_lightfield(in);
    const int uu = u.value_or(lf.center()), vv = v.value_or(lf.center());
    img = extract_view(lf, uu, vv);
    what = "view " + std::to_string(uu) + "," + std::to_string(vv);
  } else {
    img = load_image(in);
    what = h.has("kind") ? h.get("kind") : "image";
  }
  write_png(img, out);
  print({{"command", "view"}, {"input", in}, {"output", out}, {"content", what}, {"height", img.height()}, {"width", img.width()}});
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Light-field lane detection toolkit"};
  app.require_subcommand(1);
  globals g;
  app.add_option("--seed", g.seed, "Master seed")->check(CLI::NonNegativeNumber);
  app.add_option("--config", g.config, "JSON config file; flags override its values");
  app.add_option("--out-dir", g.out_dir, "Output directory");

  synth_args sa;
  auto* synth = app.add_subcommand("synth", "Generate a synthetic light-field road dataset");
  synth->add_option("--sequences", sa.sequences, "Number of sequences");
  synth->add_option("--frames", sa.frames, "Frames per sequence");
  synth->add_option("--angular", sa.angular, "Angular resolution A (odd)");
  synth->add_option("--spatial", sa.spatial, "Spatial resolution S");
  synth->add_option("--channels", sa.channels, "Channels");
  synth->add_option("--baseline", sa.baseline, "Baseline between adjacent views (m)");
  synth->add_option("--focal", sa.focal, "Focal length (px)");
  synth->add_option("--degraded-fraction", sa.degraded_fraction, "Fraction of degraded frames per sequence");

  int macro = default_macro_size;
  std::string lens_in, lens_out;
  auto* lens = app.add_subcommand("lenslet", "Convert a light-field container to the lenslet representation");
  lens->add_option("--macro", macro, "Macro-pixel size m");
  lens->add_option("input", lens_in, "Input light-field header")->required();
  lens->add_option("output", lens_out, "Output lenslet header")->required();

  train_args ta;
  auto* tr = app.add_subcommand("train", "Train one modality on a dataset");
  tr->add_option("--data", ta.data, "Dataset manifest (dataset.json)");
  tr->add_option("--modality", ta.modality, "regular2d | lf_single | lf_temporal");
  tr->add_option("--epochs", ta.epochs);
  tr->add_option("--batch-size", ta.batch_size);
  tr->add_option("--lr", ta.lr, "Base learning rate");
  tr->add_option("--decay", ta.decay, "Learning-rate decay factor");
  tr->add_option("--decay-every", ta.decay_every, "Epochs between decays");
  tr->add_option("--macro", ta.macro, "Macro-pixel size m");
  tr->add_option("--feature-dim", ta.feature_dim, "Backbone feature / LSTM hidden size");
  tr->add_option("--train-fraction", ta.train_fraction);
  tr->add_option("--split-seed", ta.split_seed, "Seed of the train/test split (default: --seed)");
  tr->add_flag("--validate-on-test", ta.validate_on_test, "Record test-split loss per epoch in history.csv");

  std::string ev_ckpt, ev_data, ev_mod;
  double pixel_scale = 0;
  auto* ev = app.add_subcommand("evaluate", "RMSE of a checkpoint on a dataset or split manifest");
  ev->add_option("--checkpoint", ev_ckpt)->required();
  ev->add_option("--data", ev_data, "Dataset or split manifest")->required();
  ev->add_option("--modality", ev_mod, "Defaults to the checkpoint's modality");
  ev->add_option("--pixel-scale", pixel_scale, "Also report rmse_px = rmse * scale");

  std::vector<std::string> reports;
  auto* cmp = app.add_subcommand("compare", "Compare evaluation reports on one test split");
  cmp->add_option("reports", reports, "report.json files")->required();

  std::vector<unsigned long long> gc_seeds;
  double gc_h = 1e-5, gc_tol = 1e-4;
  auto* gc = app.add_subcommand("gradcheck", "Finite-difference check of every backward pass");
  gc->add_option("--seeds", gc_seeds, "Seeds (default 1 2 3, or --seed)");
  gc->add_option("--step", gc_h, "Central-difference step")->check(CLI::PositiveNumber);
  gc->add_option("--tolerance", gc_tol, "Maximum relative error")->check(CLI::PositiveNumber);

  std::string view_in, view_out;
  std::optional<int> view_u, view_v;
  auto* view = app.add_subcommand("view", "Export one view or image container as PNG");
  view->add_option("input", view_in)->required();
  view->add_option("output", view_out)->required();
  view->add_option("--u", view_u, "Angular row (default: centre)");
  view->add_option("--v", view_v, "Angular column (default: centre)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : static_cast<int>(exit_code::usage);
  }

  try {
    if (*synth) return run_synth(g, sa);
    if (*lens) return run_lenslet(macro, lens_in, lens_out);
    if (*tr) return run_train(g, ta);
    if (*ev) return run_evaluate(g, ev_ckpt, ev_data, ev_mod, pixel_scale);
    if (*cmp) return run_compare(g, reports);
    if (*gc) return run_gradcheck(g, gc_seeds, gc_h, gc_tol);
    if (*view) return run_view(view_in, view_out, view_u, view_v);
  } catch (const lflane::error& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return static_cast<int>(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return static_cast<int>(exit_code::data);
  }
  return static_cast<int>(exit_code::usage);
}
