#pragma once

// Single-layer unidirectional LSTM. Gate rows are stacked [i; f; g; o]:
//   z = x W^T + h_prev U^T + b
//   i, f, o = sigmoid(z_i, z_f, z_o), g = tanh(z_g)
//   c = f * c_prev + i * g,  h = o * tanh(c)

#include <cmath>
#include <vector>

#include "lflane/neural/gemm.hpp"
#include "lflane/neural/tensor.hpp"

namespace lflane::nn {

struct lstm_params {
  tensor w;  // 4H x D
  tensor u;  // 4H x H
  tensor b;  // 4H

  std::size_t hidden() const { return u.dim(1); }
  std::size_t input_dim() const { return w.dim(1); }
};

struct lstm_cache {
  tensor x, h_prev, c_prev;
  tensor i, f, g, o;  // activated gates, N x H each
  tensor c, tanh_c;
};

struct lstm_step {
  tensor h, c;
  lstm_cache cache;
};

inline double sigmoid(double z) { return z >= 0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z)); }

inline lstm_step lstm_cell_forward(const tensor& x, const tensor& h_prev, const tensor& c_prev, const lstm_params& p) {
  const std::size_t hd = p.hidden(), d = p.input_dim();
  if (x.rank() != 2 || x.dim(1) != d) throw data_error("lstm: input must be N x " + std::to_string(d));
  const std::size_t n = x.dim(0);
  require_shape(h_prev, {n, hd}, "lstm h_prev");
  require_shape(c_prev, {n, hd}, "lstm c_prev");
  require_shape(p.w, {4 * hd, d}, "lstm W");
  require_shape(p.u, {4 * hd, hd}, "lstm U");
  require_shape(p.b, {4 * hd}, "lstm b");

  lstm_step r;
  auto& k = r.cache;
  k.x = x;
  k.h_prev = h_prev;
  k.c_prev = c_prev;
  for (tensor* t : {&k.i, &k.f, &k.g, &k.o, &k.c, &k.tanh_c}) *t = tensor({n, hd});
  for (std::size_t s = 0; s < n; ++s) {
    for (std::size_t j = 0; j < hd; ++j) {
      double z[4];
      for (std::size_t gate = 0; gate < 4; ++gate) {
        const std::size_t row = gate * hd + j;
        z[gate] = p.b[row] + kernel::dot(p.w.ptr() + row * d, x.ptr() + s * d, d) +
                  kernel::dot(p.u.ptr() + row * hd, h_prev.ptr() + s * hd, hd);
      }
      const std::size_t e = s * hd + j;
      k.i[e] = sigmoid(z[0]);
      k.f[e] = sigmoid(z[1]);
      k.g[e] = std::tanh(z[2]);
      k.o[e] = sigmoid(z[3]);
      k.c[e] = k.f[e] * c_prev[e] + k.i[e] * k.g[e];
      k.tanh_c[e] = std::tanh(k.c[e]);
    }
  }
  r.c = k.c;
  r.h = tensor({n, hd});
  for (std::size_t e = 0; e < r.h.size(); ++e) r.h[e] = k.o[e] * k.tanh_c[e];
  return r;
}

struct lstm_param_grads {
  tensor w, u, b;
};

inline lstm_param_grads zero_lstm_grads(const lstm_params& p) {
  return {tensor(p.w.shape()), tensor(p.u.shape()), tensor(p.b.shape())};
}

struct lstm_cell_grads {
  tensor grad_x, grad_h_prev, grad_c_prev;
};

// Backward through one step given dL/dh and dL/dc at its output; parameter
// gradients accumulate into `acc`.
inline lstm_cell_grads lstm_cell_backward(const lstm_cache& k, const lstm_params& p, const tensor& grad_h,
                                          const tensor& grad_c, lstm_param_grads& acc) {
  const std::size_t hd = p.hidden(), d = p.input_dim(), n = k.x.dim(0);
  require_shape(grad_h, {n, hd}, "lstm_backward grad_h");
  require_shape(grad_c, {n, hd}, "lstm_backward grad_c");
  tensor dz({n, 4 * hd});
  lstm_cell_grads r{tensor({n, d}), tensor({n, hd}), tensor({n, hd})};
  for (std::size_t s = 0; s < n; ++s)
    for (std::size_t j = 0; j < hd; ++j) {
      const std::size_t e = s * hd + j;
      const double dh = grad_h[e];
      const double dc = grad_c[e] + dh * k.o[e] * (1 - k.tanh_c[e] * k.tanh_c[e]);
      const double di = dc * k.g[e], df = dc * k.c_prev[e], dg = dc * k.i[e], dout = dh * k.tanh_c[e];
      double* z = dz.ptr() + s * 4 * hd;
      z[j] = di * k.i[e] * (1 - k.i[e]);
      z[hd + j] = df * k.f[e] * (1 - k.f[e]);
      z[2 * hd + j] = dg * (1 - k.g[e] * k.g[e]);
      z[3 * hd + j] = dout * k.o[e] * (1 - k.o[e]);
      r.grad_c_prev[e] = dc * k.f[e];
    }
  for (std::size_t s = 0; s < n; ++s)
    for (std::size_t row = 0; row < 4 * hd; ++row) acc.b[row] += dz[s * 4 * hd + row];
  kernel::gemm_tn_acc(n, d, 4 * hd, dz.ptr(), k.x.ptr(), acc.w.ptr());
  kernel::gemm_tn_acc(n, hd, 4 * hd, dz.ptr(), k.h_prev.ptr(), acc.u.ptr());
  kernel::gemm_acc(n, d, 4 * hd, dz.ptr(), p.w.ptr(), r.grad_x.ptr());
  kernel::gemm_acc(n, hd, 4 * hd, dz.ptr(), p.u.ptr(), r.grad_h_prev.ptr());
  return r;
}

struct bptt_result {
  lstm_param_grads grad_p;
  std::vector<tensor> grad_inputs;  // one per step, in forward order
  tensor grad_h0, grad_c0;
};

// Loss depends on the final hidden state only.
inline bptt_result lstm_backward_through_time(const std::vector<lstm_cache>& caches, const lstm_params& p,
                                              const tensor& grad_h_final) {
  if (caches.empty()) throw data_error("bptt: no cached steps");
  const std::size_t hd = p.hidden();
  const std::size_t n = caches.front().x.dim(0);
  for (const auto& k : caches)
    if (k.x.rank() != 2 || k.x.dim(0) != n || k.h_prev.shape() != shape_t{n, hd})
      throw data_error("bptt: cache shapes inconsistent across steps");
  bptt_result r{zero_lstm_grads(p), std::vector<tensor>(caches.size()), {}, {}};
  tensor dh = grad_h_final;
  tensor dc({n, hd});
  for (std::size_t t = caches.size(); t-- > 0;) {
    lstm_cell_grads g = lstm_cell_backward(caches[t], p, dh, dc, r.grad_p);
    r.grad_inputs[t] = std::move(g.grad_x);
    dh = std::move(g.grad_h_prev);
    dc = std::move(g.grad_c_prev);
  }
  r.grad_h0 = std::move(dh);
  r.grad_c0 = std::move(dc);
  return r;
}

}  // namespace lflane::nn
