#pragma once

// Standard gradient-verification suite: every backward pass in the stack,
// checked against central differences at seeded random points that sit at
// least 10 h away from ReLU and max-pool switching points.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "lflane/model.hpp"
#include "lflane/neural/gradcheck.hpp"
#include "lflane/neural/layers.hpp"
#include "lflane/neural/lstm.hpp"
#include "lflane/neural/optim.hpp"

namespace lflane {

struct gradcheck_case {
  std::string name;
  unsigned long long seed = 0;
  nn::grad_check_report report;
};

namespace detail {

// Resampling budget when a draw lands too close to a kink; the last draw is
// checked as is, so a huge step reports a failure instead of looping.
inline constexpr unsigned long long max_resample = 200;

inline nn::tensor random_tensor(nn::shape_t shape, std::mt19937_64& rng, double scale = 1.0) {
  nn::tensor t(std::move(shape));
  std::uniform_real_distribution<double> d(-scale, scale);
  for (double& v : t.data()) v = d(rng);
  return t;
}

inline double sum_product(const nn::tensor& a, const nn::tensor& b) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double min_abs(const nn::tensor& t) {
  double m = std::numeric_limits<double>::infinity();
  for (double v : t.data()) m = std::min(m, std::abs(v));
  return m;
}

// Smallest gap between the winner and runner-up of any 2x2 window whose
// winner is positive after relu.
inline double pool_margin(const nn::tensor& act) {
  const std::size_t n = act.dim(0), c = act.dim(1), h = act.dim(2), w = act.dim(3);
  double m = std::numeric_limits<double>::infinity();
  for (std::size_t s = 0; s < n; ++s)
    for (std::size_t ch = 0; ch < c; ++ch)
      for (std::size_t y = 0; y + 1 < h; y += 2)
        for (std::size_t x = 0; x + 1 < w; x += 2) {
          double v[4] = {act.at(s, ch, y, x), act.at(s, ch, y, x + 1), act.at(s, ch, y + 1, x), act.at(s, ch, y + 1, x + 1)};
          std::sort(v, v + 4);
          if (v[3] > 0) m = std::min(m, v[3] - v[2]);
        }
  return m;
}

inline double trace_margin(const forward_trace& tr) {
  double m = std::numeric_limits<double>::infinity();
  for (const auto& f : tr.frames) {
    for (int l = 0; l < 3; ++l) {
      m = std::min(m, min_abs(f.pre[l]));
      m = std::min(m, pool_margin(nn::relu_forward(f.pre[l])));
    }
    m = std::min(m, min_abs(f.feature_pre));
  }
  return m;
}

inline std::mt19937_64 case_rng(unsigned long long seed, unsigned long long salt) {
  std::seed_seq s{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), static_cast<std::uint32_t>(salt)};
  return std::mt19937_64(s);
}

}  // namespace detail

inline nn::grad_check_report check_conv(unsigned long long seed, std::size_t stride, std::size_t pad, double h) {
  auto rng = detail::case_rng(seed, 1 + stride * 10 + pad);
  nn::tensor x = detail::random_tensor({2, 2, 5, 5}, rng);
  nn::conv_params p{detail::random_tensor({3, 2, 3, 3}, rng), detail::random_tensor({3}, rng)};
  const nn::tensor probe_out = nn::conv2d_forward(x, p, stride, pad);
  const nn::tensor r = detail::random_tensor(probe_out.shape(), rng);
  nn::conv_grads g = nn::conv2d_backward(x, p, r, stride, pad);
  auto loss = [&] { return detail::sum_product(nn::conv2d_forward(x, p, stride, pad), r); };
  return nn::grad_check(loss, {{"x", x.data(), g.grad_x.data()},
                               {"weight", p.weight.data(), g.grad_p.weight.data()},
                               {"bias", p.bias.data(), g.grad_p.bias.data()}},
                        h);
}

inline nn::grad_check_report check_fc(unsigned long long seed, double h) {
  auto rng = detail::case_rng(seed, 2);
  nn::tensor x = detail::random_tensor({3, 5}, rng);
  nn::fc_params p{detail::random_tensor({4, 5}, rng), detail::random_tensor({4}, rng)};
  const nn::tensor r = detail::random_tensor({3, 4}, rng);
  nn::fc_grads g = nn::fc_backward(x, p, r);
  auto loss = [&] { return detail::sum_product(nn::fc_forward(x, p), r); };
  return nn::grad_check(loss, {{"x", x.data(), g.grad_x.data()},
                               {"weight", p.weight.data(), g.grad_p.weight.data()},
                               {"bias", p.bias.data(), g.grad_p.bias.data()}},
                        h);
}

// fc -> relu -> fc -> half-MSE.
inline nn::grad_check_report check_relu_chain(unsigned long long seed, double h) {
  for (unsigned long long attempt = 0;; ++attempt) {
    auto rng = detail::case_rng(seed, 3 + 1000 * attempt);
    nn::tensor x = detail::random_tensor({3, 6}, rng);
    nn::fc_params a{detail::random_tensor({5, 6}, rng), detail::random_tensor({5}, rng)};
    nn::fc_params b{detail::random_tensor({4, 5}, rng), detail::random_tensor({4}, rng)};
    const nn::tensor target = detail::random_tensor({3, 4}, rng);
    const nn::tensor z = nn::fc_forward(x, a);
    if (attempt < detail::max_resample && detail::min_abs(z) < 10 * h) continue;
    const nn::tensor y = nn::relu_forward(z);
    nn::loss_result l = nn::half_mse_loss(nn::fc_forward(y, b), target);
    nn::fc_grads gb = nn::fc_backward(y, b, l.grad);
    nn::fc_grads ga = nn::fc_backward(x, a, nn::relu_backward(z, gb.grad_x));
    auto loss = [&] { return nn::half_mse_loss(nn::fc_forward(nn::relu_forward(nn::fc_forward(x, a)), b), target).loss; };
    return nn::grad_check(loss, {{"x", x.data(), ga.grad_x.data()},
                                 {"fc1.weight", a.weight.data(), ga.grad_p.weight.data()},
                                 {"fc1.bias", a.bias.data(), ga.grad_p.bias.data()},
                                 {"fc2.weight", b.weight.data(), gb.grad_p.weight.data()},
                                 {"fc2.bias", b.bias.data(), gb.grad_p.bias.data()}},
                          h);
  }
}

inline nn::grad_check_report check_maxpool(unsigned long long seed, double h) {
  for (unsigned long long attempt = 0;; ++attempt) {
    auto rng = detail::case_rng(seed, 4 + 1000 * attempt);
    nn::tensor x = detail::random_tensor({2, 2, 4, 4}, rng);
    // Shift so every window winner is positive and the gap test applies everywhere.
    for (double& v : x.data()) v += 2.0;
    if (attempt < detail::max_resample && detail::pool_margin(x) < 10 * h) continue;
    nn::maxpool_result pr = nn::maxpool2x2_forward(x);
    const nn::tensor r = detail::random_tensor(pr.out.shape(), rng);
    nn::tensor gx = nn::maxpool2x2_backward(x.shape(), pr.argmax, r);
    auto loss = [&] { return detail::sum_product(nn::maxpool2x2_forward(x).out, r); };
    return nn::grad_check(loss, {{"x", x.data(), gx.data()}}, h);
  }
}

inline nn::lstm_params random_lstm(std::size_t d, std::size_t hd, std::mt19937_64& rng) {
  return {detail::random_tensor({4 * hd, d}, rng, 0.8), detail::random_tensor({4 * hd, hd}, rng, 0.8),
          detail::random_tensor({4 * hd}, rng, 0.5)};
}

inline nn::grad_check_report check_lstm_cell(unsigned long long seed, double h) {
  auto rng = detail::case_rng(seed, 5);
  const std::size_t n = 2, d = 3, hd = 4;
  nn::tensor x = detail::random_tensor({n, d}, rng), hp = detail::random_tensor({n, hd}, rng),
             cp = detail::random_tensor({n, hd}, rng);
  nn::lstm_params p = random_lstm(d, hd, rng);
  const nn::tensor rh = detail::random_tensor({n, hd}, rng), rc = detail::random_tensor({n, hd}, rng);
  nn::lstm_step st = nn::lstm_cell_forward(x, hp, cp, p);
  nn::lstm_param_grads acc = nn::zero_lstm_grads(p);
  nn::lstm_cell_grads g = nn::lstm_cell_backward(st.cache, p, rh, rc, acc);
  auto loss = [&] {
    nn::lstm_step s = nn::lstm_cell_forward(x, hp, cp, p);
    return detail::sum_product(s.h, rh) + detail::sum_product(s.c, rc);
  };
  return nn::grad_check(loss, {{"x", x.data(), g.grad_x.data()},
                               {"h_prev", hp.data(), g.grad_h_prev.data()},
                               {"c_prev", cp.data(), g.grad_c_prev.data()},
                               {"w", p.w.data(), acc.w.data()},
                               {"u", p.u.data(), acc.u.data()},
                               {"b", p.b.data(), acc.b.data()}},
                        h);
}

inline nn::grad_check_report check_bptt(unsigned long long seed, std::size_t steps, double h) {
  auto rng = detail::case_rng(seed, 6 + steps);
  const std::size_t n = 2, d = 3, hd = 4;
  std::vector<nn::tensor> xs;
  for (std::size_t t = 0; t < steps; ++t) xs.push_back(detail::random_tensor({n, d}, rng));
  nn::lstm_params p = random_lstm(d, hd, rng);
  const nn::tensor r = detail::random_tensor({n, hd}, rng);
  auto run = [&](std::vector<nn::lstm_cache>* caches) {
    nn::tensor hs({n, hd}), cs({n, hd});
    for (const auto& x : xs) {
      nn::lstm_step st = nn::lstm_cell_forward(x, hs, cs, p);
      hs = std::move(st.h);
      cs = std::move(st.c);
      if (caches) caches->push_back(std::move(st.cache));
    }
    return hs;
  };
  std::vector<nn::lstm_cache> caches;
  run(&caches);
  nn::bptt_result b = nn::lstm_backward_through_time(caches, p, r);
  auto loss = [&] { return detail::sum_product(run(nullptr), r); };
  std::vector<nn::grad_probe> probes{{"w", p.w.data(), b.grad_p.w.data()},
                                     {"u", p.u.data(), b.grad_p.u.data()},
                                     {"b", p.b.data(), b.grad_p.b.data()}};
  for (std::size_t t = 0; t < steps; ++t) probes.push_back({"x" + std::to_string(t), xs[t].data(), b.grad_inputs[t].data()});
  return nn::grad_check(loss, probes, h);
}

// conv -> relu -> maxpool -> fc -> half-MSE.
inline nn::grad_check_report check_conv_chain(unsigned long long seed, double h) {
  for (unsigned long long attempt = 0;; ++attempt) {
    auto rng = detail::case_rng(seed, 7 + 1000 * attempt);
    nn::tensor x = detail::random_tensor({2, 1, 6, 6}, rng);
    nn::conv_params c{detail::random_tensor({2, 1, 3, 3}, rng), detail::random_tensor({2}, rng)};
    nn::fc_params f{detail::random_tensor({3, 18}, rng), detail::random_tensor({3}, rng)};
    const nn::tensor target = detail::random_tensor({2, 3}, rng);
    const nn::tensor z = nn::conv2d_forward(x, c, 1, 1);
    const nn::tensor a = nn::relu_forward(z);
    if (attempt < detail::max_resample && (detail::min_abs(z) < 10 * h || detail::pool_margin(a) < 10 * h)) continue;
    auto forward = [&](nn::maxpool_result* keep) {
      nn::maxpool_result pr = nn::maxpool2x2_forward(nn::relu_forward(nn::conv2d_forward(x, c, 1, 1)));
      nn::tensor flat = pr.out.reshaped({2, 18});
      nn::tensor y = nn::fc_forward(flat, f);
      if (keep) *keep = std::move(pr);
      return std::pair{flat, y};
    };
    nn::maxpool_result pr;
    auto [flat, y] = forward(&pr);
    nn::loss_result l = nn::half_mse_loss(y, target);
    nn::fc_grads fg = nn::fc_backward(flat, f, l.grad);
    nn::tensor da = nn::maxpool2x2_backward(a.shape(), pr.argmax, fg.grad_x.reshaped(pr.out.shape()));
    nn::conv_grads cg = nn::conv2d_backward(x, c, nn::relu_backward(z, da), 1, 1);
    auto loss = [&] { return nn::half_mse_loss(forward(nullptr).second, target).loss; };
    return nn::grad_check(loss, {{"x", x.data(), cg.grad_x.data()},
                                 {"conv.weight", c.weight.data(), cg.grad_p.weight.data()},
                                 {"conv.bias", c.bias.data(), cg.grad_p.bias.data()},
                                 {"fc.weight", f.weight.data(), fg.grad_p.weight.data()},
                                 {"fc.bias", f.bias.data(), fg.grad_p.bias.data()}},
                          h);
  }
}

// Complete backbone -> (LSTM) -> head -> loss on a miniature model.
inline nn::grad_check_report check_full_model(unsigned long long seed, modality m, double h) {
  model_config cfg;
  cfg.kind = m;
  cfg.input_height = 8;
  cfg.input_width = 8;
  cfg.conv_widths = {2, 3, 2};
  cfg.feature_dim = 4;
  const std::size_t frames = m == modality::lf_temporal ? 3 : 1;
  for (unsigned long long attempt = 0;; ++attempt) {
    auto rng = detail::case_rng(seed, 8 + static_cast<unsigned long long>(m) * 10 + 1000 * attempt);
    model_params p = init_model(cfg, rng());
    // Nonzero biases so the check exercises every bias path.
    std::uniform_real_distribution<double> jitter(-0.2, 0.2);
    for (auto& [name, t] : p.arrays())
      if (name.ends_with("bias") || name == "lstm.b")
        for (double& v : t->data()) v += jitter(rng);
    std::vector<nn::tensor> xs;
    for (std::size_t t = 0; t < frames; ++t) xs.push_back(detail::random_tensor({1, 1, 8, 8}, rng));
    std::array<double, output_dim> target{};
    for (double& v : target) v = std::uniform_real_distribution<double>(0, 1)(rng);
    model_input in{m == modality::regular2d ? input_kind::central_view : input_kind::lenslet, {}};
    for (const auto& x : xs) in.frames.push_back(&x);
    const forward_trace tr = model_forward(p, m, in);
    if (attempt < detail::max_resample && detail::trace_margin(tr) < 10 * h) continue;
    model_params g = p.zeros_like();
    sample_loss_and_grad(p, m, in, target, 1.0, g);
    nn::tensor target_t({1, output_dim}, std::vector<double>(target.begin(), target.end()));
    auto loss = [&] { return nn::half_mse_loss(model_forward(p, m, in).prediction, target_t).loss; };
    std::vector<nn::grad_probe> probes;
    auto pa = p.arrays();
    auto ga = g.arrays();
    for (std::size_t i = 0; i < pa.size(); ++i) probes.push_back({pa[i].first, pa[i].second->data(), ga[i].second->data()});
    return nn::grad_check(loss, probes, h);
  }
}

inline std::vector<gradcheck_case> run_gradcheck_suite(const std::vector<unsigned long long>& seeds, double h = 1e-5) {
  std::vector<gradcheck_case> out;
  for (auto s : seeds) {
    out.push_back({"conv2d_s1_p1", s, check_conv(s, 1, 1, h)});
    out.push_back({"conv2d_s2_p0", s, check_conv(s, 2, 0, h)});
    out.push_back({"fc", s, check_fc(s, h)});
    out.push_back({"relu_chain", s, check_relu_chain(s, h)});
    out.push_back({"maxpool2x2", s, check_maxpool(s, h)});
    out.push_back({"lstm_cell", s, check_lstm_cell(s, h)});
    out.push_back({"bptt_t3", s, check_bptt(s, 3, h)});
    out.push_back({"conv_relu_pool_fc_loss", s, check_conv_chain(s, h)});
    out.push_back({"model_lf_single", s, check_full_model(s, modality::lf_single, h)});
    out.push_back({"model_lf_temporal", s, check_full_model(s, modality::lf_temporal, h)});
  }
  return out;
}

}  // namespace lflane
