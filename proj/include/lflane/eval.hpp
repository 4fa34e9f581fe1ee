#pragma once

// RMSE evaluation and the three-way modality comparison.

#include <algorithm>
#include <array>
#include <cmath>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "lflane/checkpoint.hpp"
#include "lflane/dataset.hpp"
#include "lflane/train.hpp"

namespace lflane {

using label_vector = std::array<double, output_dim>;

// sqrt of the mean squared coordinate error over all samples and coordinates.
inline double rmse(const std::vector<label_vector>& preds, const std::vector<label_vector>& labels) {
  if (preds.empty()) throw data_error("rmse: no samples");
  if (preds.size() != labels.size())
    throw data_error("rmse: " + std::to_string(preds.size()) + " predictions vs " + std::to_string(labels.size()) +
                     " labels");
  double total = 0;
  for (std::size_t s = 0; s < preds.size(); ++s)
    for (std::size_t i = 0; i < output_dim; ++i) {
      const double d = preds[s][i] - labels[s][i];
      total += d * d;
    }
  return std::sqrt(total / static_cast<double>(preds.size() * output_dim));
}

struct eval_report {
  modality kind = modality::regular2d;
  double rmse = 0;
  std::size_t n_predictions = 0;
  std::vector<std::string> sample_ids;
  std::vector<double> sample_mse;  // per-sample mean squared coordinate error
  std::string checkpoint_id;
  std::string dataset_id;
  std::string split_id;
  unsigned long long seed = 0;
  double pixel_scale = 0;  // > 0 adds rmse_px = rmse * pixel_scale to rendered output
};

inline eval_report evaluate(const checkpoint& ckpt, const dataset& test, modality m) {
  if (ckpt.config.kind != m)
    throw data_error(std::string("evaluate: checkpoint was trained for ") + to_string(ckpt.config.kind) + ", not " +
                     to_string(m));
  if (test.sequences.empty()) throw data_error("evaluate: empty test set");
  if (test.height != ckpt.config.input_height || test.width != ckpt.config.input_width ||
      test.channels != ckpt.config.input_channels)
    throw data_error("evaluate: test images do not match the checkpoint input size");
  eval_report r;
  r.kind = m;
  r.checkpoint_id = checkpoint_id(ckpt);
  r.dataset_id = test.dataset_id;
  r.split_id = test.split_id;
  r.seed = ckpt.seed;
  std::vector<label_vector> preds, labels;
  for (const auto& u : evaluation_units(test)) {
    const label_vector pred = forward_sample(ckpt.params, m, make_input(test, m, u));
    const label_vector label = target_of(test, u);
    for (double v : pred)
      if (!std::isfinite(v)) throw numerical_error("evaluate: non-finite prediction");
    double se = 0;
    for (std::size_t i = 0; i < output_dim; ++i) se += (pred[i] - label[i]) * (pred[i] - label[i]);
    r.sample_ids.push_back(test.sequences[u.sequence].sequence_id);
    r.sample_mse.push_back(se / output_dim);
    preds.push_back(pred);
    labels.push_back(label);
  }
  r.n_predictions = preds.size();
  r.rmse = rmse(preds, labels);
  return r;
}

inline nlohmann::json to_json(const eval_report& r) {
  nlohmann::json j{{"modality", to_string(r.kind)},
                   {"rmse", r.rmse},
                   {"n_predictions", r.n_predictions},
                   {"checkpoint_id", r.checkpoint_id},
                   {"dataset_id", r.dataset_id},
                   {"split_id", r.split_id},
                   {"seed", r.seed},
                   {"sample_ids", r.sample_ids},
                   {"per_sample_mse", r.sample_mse}};
  if (r.pixel_scale > 0) j["rmse_px"] = r.rmse * r.pixel_scale;
  return j;
}

inline eval_report eval_report_from_json(const nlohmann::json& j) {
  try {
    eval_report r;
    r.kind = modality_from_string(j.at("modality").get<std::string>());
    r.rmse = j.at("rmse").get<double>();
    r.n_predictions = j.at("n_predictions").get<std::size_t>();
    r.checkpoint_id = j.at("checkpoint_id").get<std::string>();
    r.dataset_id = j.at("dataset_id").get<std::string>();
    r.split_id = j.at("split_id").get<std::string>();
    r.seed = j.value("seed", 0ull);
    r.sample_ids = j.value("sample_ids", std::vector<std::string>{});
    r.sample_mse = j.value("per_sample_mse", std::vector<double>{});
    if (r.rmse < 0) throw data_error("report: negative rmse");
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw data_error(std::string("malformed report: ") + e.what());
  }
}

inline std::string per_sample_csv(const eval_report& r) {
  std::ostringstream os;
  os << "sample,sequence_id,mse\n" << std::setprecision(17);
  for (std::size_t i = 0; i < r.sample_mse.size(); ++i)
    os << i << "," << (i < r.sample_ids.size() ? r.sample_ids[i] : "") << "," << r.sample_mse[i] << "\n";
  return os.str();
}

// ---- comparison ------------------------------------------------------------------

struct comparison_table {
  std::vector<eval_report> reports;
  bool has_all_modalities = false;
  bool temporal_beats_single = false;
  bool single_beats_regular = false;
  bool ordering = false;  // rmse(lf_temporal) < rmse(lf_single) < rmse(regular2d)
};

inline const eval_report* find_report(const std::vector<eval_report>& reports, modality m) {
  for (const auto& r : reports)
    if (r.kind == m) return &r;
  return nullptr;
}

inline comparison_table compare(const std::vector<eval_report>& reports) {
  if (reports.size() < 2) throw usage_error("compare: need at least two reports");
  for (const auto& r : reports)
    if (r.dataset_id != reports.front().dataset_id || r.split_id != reports.front().split_id)
      throw data_error("compare: reports were computed on different test splits (" + r.dataset_id + "/" + r.split_id +
                       " vs " + reports.front().dataset_id + "/" + reports.front().split_id + ")");
  comparison_table t;
  t.reports = reports;
  const eval_report* tmp = find_report(reports, modality::lf_temporal);
  const eval_report* single = find_report(reports, modality::lf_single);
  const eval_report* reg = find_report(reports, modality::regular2d);
  t.has_all_modalities = tmp && single && reg;
  t.temporal_beats_single = tmp && single && tmp->rmse < single->rmse;
  t.single_beats_regular = single && reg && single->rmse < reg->rmse;
  t.ordering = t.temporal_beats_single && t.single_beats_regular;
  return t;
}

inline nlohmann::json to_json(const comparison_table& t) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& r : t.reports)
    rows.push_back({{"modality", to_string(r.kind)}, {"rmse", r.rmse}, {"n_predictions", r.n_predictions},
                    {"checkpoint_id", r.checkpoint_id}});
  return {{"dataset_id", t.reports.front().dataset_id},
          {"split_id", t.reports.front().split_id},
          {"reports", rows},
          {"temporal_beats_single", t.temporal_beats_single},
          {"single_beats_regular", t.single_beats_regular},
          {"ordering_temporal_single_regular", t.ordering}};
}

inline std::string comparison_csv(const comparison_table& t) {
  std::ostringstream os;
  os << "modality,rmse,n_predictions\n" << std::setprecision(17);
  for (const auto& r : t.reports) os << to_string(r.kind) << "," << r.rmse << "," << r.n_predictions << "\n";
  return os.str();
}

// One bar per report, height proportional to RMSE.
inline std::string comparison_svg(const comparison_table& t, const std::string& title = "Lane regression RMSE") {
  const int bar_w = 90, gap = 40, left = 70, top = 50, plot_h = 260;
  const int width = left + static_cast<int>(t.reports.size()) * (bar_w + gap) + gap;
  const int height = top + plot_h + 70;
  double max_rmse = 0;
  for (const auto& r : t.reports) max_rmse = std::max(max_rmse, r.rmse);
  if (max_rmse <= 0) max_rmse = 1;
  std::ostringstream os;
  os << std::fixed << std::setprecision(2);
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height << "\" viewBox=\"0 0 "
     << width << " " << height << "\">\n";
  os << "  <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "  <text x=\"" << width / 2 << "\" y=\"28\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"16\">"
     << title << "</text>\n";
  os << "  <line x1=\"" << left << "\" y1=\"" << top + plot_h << "\" x2=\"" << width - 10 << "\" y2=\"" << top + plot_h
     << "\" stroke=\"black\"/>\n";
  os << "  <line x1=\"" << left << "\" y1=\"" << top << "\" x2=\"" << left << "\" y2=\"" << top + plot_h
     << "\" stroke=\"black\"/>\n";
  os << "  <text x=\"18\" y=\"" << top + plot_h / 2 << "\" font-family=\"sans-serif\" font-size=\"12\" transform=\"rotate(-90 18 "
     << top + plot_h / 2 << ")\" text-anchor=\"middle\">RMSE (normalized)</text>\n";
  const char* colors[] = {"#4c72b0", "#55a868", "#c44e52", "#8172b2"};
  for (std::size_t i = 0; i < t.reports.size(); ++i) {
    const auto& r = t.reports[i];
    const double h = plot_h * r.rmse / max_rmse;
    const int x = left + gap + static_cast<int>(i) * (bar_w + gap);
    os << "  <rect x=\"" << x << "\" y=\"" << top + plot_h - h << "\" width=\"" << bar_w << "\" height=\"" << h
       << "\" fill=\"" << colors[static_cast<int>(r.kind) % 4] << "\"/>\n";
    os << std::setprecision(4);
    os << "  <text x=\"" << x + bar_w / 2 << "\" y=\"" << top + plot_h - h - 6
       << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">" << r.rmse << "</text>\n";
    os << std::setprecision(2);
    os << "  <text x=\"" << x + bar_w / 2 << "\" y=\"" << top + plot_h + 20
       << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">" << to_string(r.kind) << "</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

}  // namespace lflane
