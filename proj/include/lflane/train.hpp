#pragma once

// Training loop: Adam with step-decayed learning rate over shuffled units.
// A unit is one frame for the non-temporal modalities and one whole sequence
// (supervised on its final frame) for lf_temporal; batch_size counts units.

#include <cmath>
#include <fstream>
#include <iomanip>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "lflane/checkpoint.hpp"
#include "lflane/dataset.hpp"
#include "lflane/model.hpp"

namespace lflane {

struct train_config {
  nn::lr_schedule schedule;  // 3e-4, x0.1 every 20 epochs
  int batch_size = 32;
  int epochs = 40;
  std::string optimizer = "adam";
  double train_fraction = 0.70;
  unsigned long long seed = 0;
  int macro_size = default_macro_size;
  std::array<int, 3> conv_widths{8, 16, 32};
  int feature_dim = 64;

  void validate() const {
    schedule.validate();
    if (batch_size < 1) throw usage_error("train: batch_size must be >= 1");
    if (epochs < 0) throw usage_error("train: epochs must be >= 0");
    if (optimizer != "adam") throw usage_error("train: only the adam optimizer is supported");
    if (!(train_fraction > 0 && train_fraction < 1)) throw usage_error("train: train_fraction must lie in (0, 1)");
    if (macro_size < 1) throw usage_error("train: macro_size must be >= 1");
  }
};

inline nlohmann::json to_json(const train_config& c) {
  return {{"base_lr", c.schedule.base_lr},
          {"decay_factor", c.schedule.decay_factor},
          {"decay_every", c.schedule.decay_every},
          {"batch_size", c.batch_size},
          {"epochs", c.epochs},
          {"optimizer", c.optimizer},
          {"train_fraction", c.train_fraction},
          {"seed", c.seed},
          {"macro_size", c.macro_size},
          {"conv_widths", c.conv_widths},
          {"feature_dim", c.feature_dim}};
}

inline void update_from_json(train_config& c, const nlohmann::json& j) {
  try {
    c.schedule.base_lr = j.value("base_lr", c.schedule.base_lr);
    c.schedule.decay_factor = j.value("decay_factor", c.schedule.decay_factor);
    c.schedule.decay_every = j.value("decay_every", c.schedule.decay_every);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.epochs = j.value("epochs", c.epochs);
    c.optimizer = j.value("optimizer", c.optimizer);
    c.train_fraction = j.value("train_fraction", c.train_fraction);
    c.seed = j.value("seed", c.seed);
    c.macro_size = j.value("macro_size", c.macro_size);
    if (j.contains("conv_widths")) c.conv_widths = j["conv_widths"].get<std::array<int, 3>>();
    c.feature_dim = j.value("feature_dim", c.feature_dim);
  } catch (const nlohmann::json::exception& e) {
    throw usage_error(std::string("train config: ") + e.what());
  }
}

inline model_config model_config_for(const dataset& d, modality m, const train_config& c) {
  model_config mc;
  mc.kind = m;
  mc.input_height = d.height;
  mc.input_width = d.width;
  mc.input_channels = d.channels;
  mc.conv_widths = c.conv_widths;
  mc.feature_dim = c.feature_dim;
  return mc;
}

// ---- units -----------------------------------------------------------------------

struct unit_ref {
  std::size_t sequence = 0;
  std::size_t frame = 0;  // the supervised frame
};

inline std::vector<unit_ref> training_units(const dataset& d, modality m) {
  std::vector<unit_ref> units;
  for (std::size_t s = 0; s < d.sequences.size(); ++s) {
    const std::size_t t = d.sequences[s].labels.size();
    if (m == modality::lf_temporal)
      units.push_back({s, t - 1});
    else
      for (std::size_t f = 0; f < t; ++f) units.push_back({s, f});
  }
  return units;
}

// Evaluation protocol: one unit per sequence, scored on its final frame.
inline std::vector<unit_ref> evaluation_units(const dataset& d) {
  std::vector<unit_ref> units;
  for (std::size_t s = 0; s < d.sequences.size(); ++s) units.push_back({s, d.sequences[s].labels.size() - 1});
  return units;
}

inline model_input make_input(const dataset& d, modality m, const unit_ref& u) {
  const sequence_data& s = d.sequences[u.sequence];
  model_input in;
  switch (m) {
    case modality::regular2d:
      in.kind = input_kind::central_view;
      in.frames.push_back(&s.central[u.frame]);
      break;
    case modality::lf_single:
      in.kind = input_kind::lenslet;
      in.frames.push_back(&s.lenslet[u.frame]);
      break;
    case modality::lf_temporal:
      in.kind = input_kind::lenslet;
      for (std::size_t f = 0; f <= u.frame; ++f) in.frames.push_back(&s.lenslet[f]);
      break;
  }
  return in;
}

inline std::array<double, output_dim> target_of(const dataset& d, const unit_ref& u) {
  return d.sequences[u.sequence].labels[u.frame].values;
}

// Mean half squared error over units (no parameter update).
inline double mean_loss(const model_params& p, modality m, const dataset& d, const std::vector<unit_ref>& units) {
  if (units.empty()) return 0.0;
  double total = 0;
  for (const auto& u : units) {
    const auto pred = forward_sample(p, m, make_input(d, m, u));
    const auto target = target_of(d, u);
    double se = 0;
    for (std::size_t i = 0; i < output_dim; ++i) se += (pred[i] - target[i]) * (pred[i] - target[i]);
    total += 0.5 * se;
  }
  return total / static_cast<double>(units.size());
}

// ---- training --------------------------------------------------------------------

struct epoch_record {
  int epoch = 0;  // 0 = before any update
  double lr = 0;
  double train_loss = 0;
  double val_loss = 0;
};

struct train_result {
  checkpoint model;
  std::vector<epoch_record> history;
};

inline std::string rng_state_string(const std::mt19937_64& rng) {
  std::ostringstream os;
  os << rng;
  return os.str();
}

// Row 0 holds the losses of the initialization; row e >= 1 holds the mean
// batch loss during epoch e and the validation loss after it.
inline train_result train(const dataset& train_set, const dataset* val_set, modality m, const train_config& cfg) {
  cfg.validate();
  const std::vector<unit_ref> units = training_units(train_set, m);
  if (units.empty()) throw data_error("train: empty training set");
  const std::vector<unit_ref> val_units = val_set ? evaluation_units(*val_set) : std::vector<unit_ref>{};

  train_result r;
  r.model.config = model_config_for(train_set, m, cfg);
  r.model.params = init_model(r.model.config, cfg.seed);
  r.model.dataset_id = train_set.dataset_id;
  r.model.seed = cfg.seed;
  model_params& p = r.model.params;

  std::mt19937_64 rng(cfg.seed ^ 0x9e3779b97f4a7c15ull);
  nn::adam_state opt = nn::make_adam_state(p.spans());

  auto val_loss = [&] { return val_set ? mean_loss(p, m, *val_set, val_units) : 0.0; };
  r.history.push_back({0, nn::lr_at_epoch(cfg.schedule, 0), mean_loss(p, m, train_set, units), val_loss()});

  std::vector<std::size_t> order(units.size());
  std::iota(order.begin(), order.end(), 0);
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const double lr = nn::lr_at_epoch(cfg.schedule, epoch);
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_total = 0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
      const double weight = 1.0 / static_cast<double>(end - start);
      model_params grads = p.zeros_like();
      double batch_total = 0;
      for (std::size_t b = start; b < end; ++b) {
        const unit_ref& u = units[order[b]];
        batch_total += sample_loss_and_grad(p, m, make_input(train_set, m, u), target_of(train_set, u), weight, grads);
      }
      if (!std::isfinite(batch_total) || !grads.all_finite())
        throw numerical_error("train: non-finite loss at epoch " + std::to_string(epoch + 1) + ", batch starting at unit " +
                              std::to_string(start) + " (lr " + std::to_string(lr) + ")");
      epoch_total += batch_total;
      nn::adam_step(p.spans(), grads.const_spans(), opt, lr);
    }
    r.history.push_back({epoch + 1, lr, epoch_total / static_cast<double>(units.size()), val_loss()});
  }
  r.model.step = opt.step;
  r.model.rng_state = rng_state_string(rng);
  return r;
}

inline std::string history_csv(const std::vector<epoch_record>& h) {
  std::ostringstream os;
  os << "epoch,lr,train_loss,val_loss\n" << std::setprecision(17);
  for (const auto& e : h) os << e.epoch << "," << e.lr << "," << e.train_loss << "," << e.val_loss << "\n";
  return os.str();
}

}  // namespace lflane
