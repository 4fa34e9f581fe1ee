#pragma once

// Lane regression models for the three input modalities:
//
//   regular2d    central view  -> backbone -> fc(20)
//   lf_single    lenslet image -> backbone -> fc(20)
//   lf_temporal  T lenslet images -> backbone per frame -> LSTM -> fc(20) on h_T
//
// Backbone: 3 x [conv3x3 pad 1 -> relu -> maxpool2x2], flatten, fc -> relu
// giving a D-dimensional feature. The LSTM hidden size equals D so all three
// heads have the same shape.

#include <array>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "lflane/error.hpp"
#include "lflane/neural/layers.hpp"
#include "lflane/neural/lstm.hpp"
#include "lflane/neural/optim.hpp"
#include "lflane/scene.hpp"

namespace lflane {

enum class modality { regular2d, lf_single, lf_temporal };

inline const char* to_string(modality m) {
  switch (m) {
    case modality::regular2d: return "regular2d";
    case modality::lf_single: return "lf_single";
    case modality::lf_temporal: return "lf_temporal";
  }
  return "regular2d";
}

inline modality modality_from_string(const std::string& s) {
  for (auto m : {modality::regular2d, modality::lf_single, modality::lf_temporal})
    if (s == to_string(m)) return m;
  throw usage_error("unknown modality: " + s + " (expected regular2d, lf_single or lf_temporal)");
}

inline constexpr std::size_t output_dim = label_size;

struct model_config {
  modality kind = modality::lf_temporal;
  int input_height = 64;
  int input_width = 64;
  int input_channels = 1;
  std::array<int, 3> conv_widths{8, 16, 32};
  int feature_dim = 64;

  int flat_dim() const { return conv_widths[2] * (input_height / 8) * (input_width / 8); }

  void validate() const {
    if (input_height < 8 || input_width < 8 || input_height % 8 || input_width % 8)
      throw usage_error("model: input extents must be positive multiples of 8");
    if (input_channels < 1) throw usage_error("model: input_channels must be >= 1");
    for (int w : conv_widths)
      if (w < 1) throw usage_error("model: conv widths must be >= 1");
    if (feature_dim < 1) throw usage_error("model: feature_dim must be >= 1");
  }

  bool operator==(const model_config&) const = default;
};

struct model_params {
  std::array<nn::conv_params, 3> conv;
  nn::fc_params feature;
  std::optional<nn::lstm_params> lstm;
  nn::fc_params head;

  // Fixed order used by the optimizer, checkpoints and gradient checks.
  std::vector<std::pair<std::string, nn::tensor*>> arrays() {
    std::vector<std::pair<std::string, nn::tensor*>> out;
    for (int l = 0; l < 3; ++l) {
      out.emplace_back("conv" + std::to_string(l) + ".weight", &conv[l].weight);
      out.emplace_back("conv" + std::to_string(l) + ".bias", &conv[l].bias);
    }
    out.emplace_back("feature.weight", &feature.weight);
    out.emplace_back("feature.bias", &feature.bias);
    if (lstm) {
      out.emplace_back("lstm.w", &lstm->w);
      out.emplace_back("lstm.u", &lstm->u);
      out.emplace_back("lstm.b", &lstm->b);
    }
    out.emplace_back("head.weight", &head.weight);
    out.emplace_back("head.bias", &head.bias);
    return out;
  }
  std::vector<std::pair<std::string, const nn::tensor*>> arrays() const {
    std::vector<std::pair<std::string, const nn::tensor*>> out;
    for (auto& [name, t] : const_cast<model_params*>(this)->arrays()) out.emplace_back(name, t);
    return out;
  }

  std::vector<std::span<double>> spans() {
    std::vector<std::span<double>> out;
    for (auto& [name, t] : arrays()) out.push_back(t->data());
    return out;
  }
  std::vector<std::span<const double>> const_spans() const {
    std::vector<std::span<const double>> out;
    for (auto& [name, t] : arrays()) out.push_back(t->data());
    return out;
  }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (auto& [name, t] : arrays()) n += t->size();
    return n;
  }

  model_params zeros_like() const {
    model_params z = *this;
    for (auto& [name, t] : z.arrays()) t->fill(0.0);
    return z;
  }

  void add(const model_params& other) {
    auto mine = arrays();
    auto theirs = other.arrays();
    for (std::size_t i = 0; i < mine.size(); ++i) nn::add_into(*mine[i].second, *theirs[i].second);
  }

  bool all_finite() const {
    for (auto& [name, t] : arrays())
      if (!t->all_finite()) return false;
    return true;
  }

  bool operator==(const model_params& o) const {
    auto a = arrays();
    auto b = o.arrays();
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i)
      if (a[i].first != b[i].first || !(*a[i].second == *b[i].second)) return false;
    return true;
  }
};

// Shapes only, all zeros.
inline model_params allocate_model(const model_config& cfg) {
  cfg.validate();
  model_params p;
  int in = cfg.input_channels;
  for (int l = 0; l < 3; ++l) {
    const auto out = static_cast<std::size_t>(cfg.conv_widths[l]);
    p.conv[l] = {nn::tensor({out, static_cast<std::size_t>(in), 3, 3}), nn::tensor({out})};
    in = cfg.conv_widths[l];
  }
  const auto d = static_cast<std::size_t>(cfg.feature_dim);
  p.feature = {nn::tensor({d, static_cast<std::size_t>(cfg.flat_dim())}), nn::tensor({d})};
  if (cfg.kind == modality::lf_temporal) p.lstm = nn::lstm_params{nn::tensor({4 * d, d}), nn::tensor({4 * d, d}), nn::tensor({4 * d})};
  p.head = {nn::tensor({output_dim, d}), nn::tensor({output_dim})};
  return p;
}

// He-style uniform weights U(-sqrt(6 / fan_in), +sqrt(6 / fan_in)), zero
// biases; the LSTM uses fan_in = D + H and a forget-gate bias of 1.
inline model_params init_model(const model_config& cfg, unsigned long long seed) {
  model_params p = allocate_model(cfg);
  std::mt19937_64 rng(seed);
  auto fill_uniform = [&](nn::tensor& t, double fan_in) {
    std::uniform_real_distribution<double> dist(-std::sqrt(6.0 / fan_in), std::sqrt(6.0 / fan_in));
    for (double& v : t.data()) v = dist(rng);
  };
  for (auto& c : p.conv) fill_uniform(c.weight, static_cast<double>(c.in_channels() * 9));
  fill_uniform(p.feature.weight, static_cast<double>(p.feature.in_dim()));
  if (p.lstm) {
    const double fan = static_cast<double>(p.lstm->input_dim() + p.lstm->hidden());
    fill_uniform(p.lstm->w, fan);
    fill_uniform(p.lstm->u, fan);
    const std::size_t h = p.lstm->hidden();
    for (std::size_t j = 0; j < h; ++j) p.lstm->b[h + j] = 1.0;
  }
  fill_uniform(p.head.weight, static_cast<double>(p.head.in_dim()));
  return p;
}

// ---- forward / backward ------------------------------------------------------

struct backbone_cache {
  std::array<nn::tensor, 3> input;  // conv inputs
  std::array<nn::tensor, 3> pre;    // conv outputs before relu
  std::array<nn::shape_t, 3> act_shape;
  std::array<std::vector<std::size_t>, 3> argmax;
  nn::tensor flat, feature_pre, feature;
};

inline backbone_cache backbone_forward(const model_params& p, const nn::tensor& x) {
  backbone_cache k;
  nn::tensor h = x;
  for (int l = 0; l < 3; ++l) {
    k.input[l] = std::move(h);
    k.pre[l] = nn::conv2d_forward(k.input[l], p.conv[l], 1, 1);
    nn::tensor a = nn::relu_forward(k.pre[l]);
    k.act_shape[l] = a.shape();
    nn::maxpool_result pr = nn::maxpool2x2_forward(a);
    k.argmax[l] = std::move(pr.argmax);
    h = std::move(pr.out);
  }
  const std::size_t n = h.dim(0);
  k.flat = h.reshaped({n, h.size() / n});
  k.feature_pre = nn::fc_forward(k.flat, p.feature);
  k.feature = nn::relu_forward(k.feature_pre);
  return k;
}

// Accumulates backbone parameter gradients into `g`.
inline void backbone_backward(const backbone_cache& k, const model_params& p, const nn::tensor& grad_feature,
                              model_params& g) {
  nn::tensor d = nn::relu_backward(k.feature_pre, grad_feature);
  nn::fc_grads fg = nn::fc_backward(k.flat, p.feature, d);
  nn::add_into(g.feature.weight, fg.grad_p.weight);
  nn::add_into(g.feature.bias, fg.grad_p.bias);
  const std::size_t n = k.flat.dim(0);
  const auto& last = k.act_shape[2];
  d = fg.grad_x.reshaped({n, last[1], last[2] / 2, last[3] / 2});
  for (int l = 2; l >= 0; --l) {
    nn::tensor da = nn::maxpool2x2_backward(k.act_shape[l], k.argmax[l], d);
    nn::tensor dz = nn::relu_backward(k.pre[l], da);
    nn::conv_grads cg = nn::conv2d_backward(k.input[l], p.conv[l], dz, 1, 1, l > 0);
    nn::add_into(g.conv[l].weight, cg.grad_p.weight);
    nn::add_into(g.conv[l].bias, cg.grad_p.bias);
    d = std::move(cg.grad_x);
  }
}

enum class input_kind { central_view, lenslet };

// One model input: a single image for the non-temporal modalities, the whole
// sequence (temporal order) for lf_temporal. Frames are 1 x C x H x W.
struct model_input {
  input_kind kind = input_kind::lenslet;
  std::vector<const nn::tensor*> frames;
};

inline void check_input(modality m, const model_input& in) {
  const input_kind want = m == modality::regular2d ? input_kind::central_view : input_kind::lenslet;
  if (in.kind != want)
    throw data_error(std::string("modality ") + to_string(m) + " expects " +
                     (want == input_kind::lenslet ? "lenslet images" : "central views"));
  if (in.frames.empty()) throw data_error("model input has no frames");
  if (m != modality::lf_temporal && in.frames.size() != 1)
    throw data_error(std::string("modality ") + to_string(m) + " takes exactly one frame");
}

struct forward_trace {
  std::vector<backbone_cache> frames;
  std::vector<nn::lstm_cache> steps;
  nn::tensor head_in;
  nn::tensor prediction;  // 1 x 20
};

inline forward_trace model_forward(const model_params& p, modality m, const model_input& in) {
  check_input(m, in);
  if ((m == modality::lf_temporal) != p.lstm.has_value())
    throw data_error(std::string("model parameters do not match modality ") + to_string(m));
  forward_trace tr;
  for (const nn::tensor* f : in.frames) tr.frames.push_back(backbone_forward(p, *f));
  if (m == modality::lf_temporal) {
    const std::size_t h = p.lstm->hidden();
    nn::tensor hs({1, h}), cs({1, h});
    for (auto& fc : tr.frames) {
      nn::lstm_step st = nn::lstm_cell_forward(fc.feature, hs, cs, *p.lstm);
      hs = std::move(st.h);
      cs = std::move(st.c);
      tr.steps.push_back(std::move(st.cache));
    }
    tr.head_in = std::move(hs);
  } else {
    tr.head_in = tr.frames.front().feature;
  }
  tr.prediction = nn::fc_forward(tr.head_in, p.head);
  return tr;
}

inline void model_backward(const forward_trace& tr, const model_params& p, const nn::tensor& grad_prediction,
                           model_params& g) {
  nn::fc_grads hg = nn::fc_backward(tr.head_in, p.head, grad_prediction);
  nn::add_into(g.head.weight, hg.grad_p.weight);
  nn::add_into(g.head.bias, hg.grad_p.bias);
  if (!tr.steps.empty()) {
    nn::bptt_result b = nn::lstm_backward_through_time(tr.steps, *p.lstm, hg.grad_x);
    nn::add_into(g.lstm->w, b.grad_p.w);
    nn::add_into(g.lstm->u, b.grad_p.u);
    nn::add_into(g.lstm->b, b.grad_p.b);
    for (std::size_t t = 0; t < tr.frames.size(); ++t) backbone_backward(tr.frames[t], p, b.grad_inputs[t], g);
  } else {
    backbone_backward(tr.frames.front(), p, hg.grad_x, g);
  }
}

inline std::array<double, output_dim> forward_sample(const model_params& p, modality m, const model_input& in) {
  const forward_trace tr = model_forward(p, m, in);
  std::array<double, output_dim> out{};
  std::copy(tr.prediction.data().begin(), tr.prediction.data().end(), out.begin());
  return out;
}

// Half squared error of one sample; gradients scaled by `weight` accumulate into `g`.
inline double sample_loss_and_grad(const model_params& p, modality m, const model_input& in,
                                   const std::array<double, output_dim>& target, double weight, model_params& g) {
  const forward_trace tr = model_forward(p, m, in);
  nn::loss_result l =
      nn::half_mse_loss(tr.prediction, nn::tensor({1, output_dim}, std::vector<double>(target.begin(), target.end())));
  for (double& v : l.grad.data()) v *= weight;
  model_backward(tr, p, l.grad, g);
  return l.loss;
}

}  // namespace lflane
