#pragma once

// Half-MSE regression loss, Adam, and the step-decay learning-rate schedule.

#include <cmath>
#include <span>
#include <vector>

#include "lflane/neural/tensor.hpp"

namespace lflane::nn {

struct loss_result {
  double loss = 0;
  tensor grad;
};

// loss = sum ||pred - target||^2 / (2N), grad = (pred - target) / N.
inline loss_result half_mse_loss(const tensor& pred, const tensor& target) {
  if (pred.shape() != target.shape() || pred.rank() != 2)
    throw data_error("half_mse_loss: pred " + shape_string(pred.shape()) + " and target " +
                     shape_string(target.shape()) + " must be matching N x D");
  const double n = static_cast<double>(pred.dim(0));
  loss_result r{0.0, tensor(pred.shape())};
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double d = pred[i] - target[i];
    r.loss += d * d;
    r.grad[i] = d / n;
  }
  r.loss /= 2 * n;
  return r;
}

struct adam_state {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  long long step = 0;
  std::vector<std::vector<double>> m, v;
};

inline adam_state make_adam_state(const std::vector<std::span<double>>& params) {
  adam_state s;
  for (const auto& p : params) {
    s.m.emplace_back(p.size(), 0.0);
    s.v.emplace_back(p.size(), 0.0);
  }
  return s;
}

// One bias-corrected Adam update over parallel lists of parameter and
// gradient arrays.
inline void adam_step(const std::vector<std::span<double>>& params,
                      const std::vector<std::span<const double>>& grads, adam_state& s, double lr) {
  if (params.size() != grads.size() || params.size() != s.m.size())
    throw data_error("adam_step: parameter/gradient/state counts differ");
  for (std::size_t a = 0; a < params.size(); ++a)
    if (params[a].size() != grads[a].size() || params[a].size() != s.m[a].size())
      throw data_error("adam_step: shape mismatch in parameter array " + std::to_string(a));
  ++s.step;
  const double c1 = 1 - std::pow(s.beta1, static_cast<double>(s.step));
  const double c2 = 1 - std::pow(s.beta2, static_cast<double>(s.step));
  for (std::size_t a = 0; a < params.size(); ++a) {
    auto p = params[a];
    auto g = grads[a];
    auto& m = s.m[a];
    auto& v = s.v[a];
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = s.beta1 * m[i] + (1 - s.beta1) * g[i];
      v[i] = s.beta2 * v[i] + (1 - s.beta2) * g[i] * g[i];
      p[i] -= lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + s.epsilon);
    }
  }
}

struct lr_schedule {
  double base_lr = 3e-4;
  double decay_factor = 0.1;
  int decay_every = 20;

  void validate() const {
    if (!(base_lr > 0)) throw usage_error("lr schedule: base_lr must be > 0");
    if (!(decay_factor > 0 && decay_factor <= 1)) throw usage_error("lr schedule: decay_factor must lie in (0, 1]");
    if (decay_every < 1) throw usage_error("lr schedule: decay_every must be >= 1");
  }
};

inline double lr_at_epoch(const lr_schedule& s, int epoch) {
  if (epoch < 0) throw usage_error("lr_at_epoch: epoch must be >= 0");
  return s.base_lr * std::pow(s.decay_factor, epoch / s.decay_every);
}

}  // namespace lflane::nn
