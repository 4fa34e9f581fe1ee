#pragma once

// Convolution, ReLU, 2x2 max pooling and fully-connected layers with exact
// backward passes. Image tensors are N x C x H x W.

#include <limits>
#include <string>
#include <vector>

#include "lflane/neural/gemm.hpp"
#include "lflane/neural/tensor.hpp"

namespace lflane::nn {

struct conv_params {
  tensor weight;  // K_out x K_in x k x k
  tensor bias;    // K_out

  std::size_t out_channels() const { return weight.dim(0); }
  std::size_t in_channels() const { return weight.dim(1); }
  std::size_t kernel() const { return weight.dim(2); }
};

struct conv_geometry {
  std::size_t out_h = 0, out_w = 0;
};

inline conv_geometry conv_output_shape(std::size_t h, std::size_t w, std::size_t k, std::size_t stride,
                                       std::size_t pad) {
  if (stride < 1) throw data_error("conv2d: stride must be >= 1");
  if (h + 2 * pad < k || w + 2 * pad < k) throw data_error("conv2d: kernel larger than padded input");
  if ((h + 2 * pad - k) % stride || (w + 2 * pad - k) % stride)
    throw data_error("conv2d: output extent is not integral for this stride/padding");
  return {(h + 2 * pad - k) / stride + 1, (w + 2 * pad - k) / stride + 1};
}

namespace detail {

inline void check_conv(const tensor& x, const conv_params& p) {
  if (x.rank() != 4) throw data_error("conv2d: input must be N x C x H x W");
  if (p.weight.rank() != 4 || p.weight.dim(2) != p.weight.dim(3))
    throw data_error("conv2d: weight must be K_out x K_in x k x k");
  if (p.weight.dim(1) != x.dim(1))
    throw data_error("conv2d: input has " + std::to_string(x.dim(1)) + " channels, kernel expects " +
                     std::to_string(p.weight.dim(1)));
  require_shape(p.bias, {p.weight.dim(0)}, "conv2d bias");
}

// cols: (C*k*k) x (Ho*Wo), zero outside the input.
inline void im2col(const double* img, std::size_t c, std::size_t h, std::size_t w, std::size_t k,
                   std::size_t stride, std::size_t pad, const conv_geometry& g, double* cols) {
  const std::size_t plane = g.out_h * g.out_w;
  for (std::size_t ci = 0; ci < c; ++ci)
    for (std::size_t kh = 0; kh < k; ++kh)
      for (std::size_t kw = 0; kw < k; ++kw) {
        double* row = cols + ((ci * k + kh) * k + kw) * plane;
        for (std::size_t oy = 0; oy < g.out_h; ++oy) {
          const long iy = static_cast<long>(oy * stride + kh) - static_cast<long>(pad);
          double* dst = row + oy * g.out_w;
          if (iy < 0 || iy >= static_cast<long>(h)) {
            std::fill(dst, dst + g.out_w, 0.0);
            continue;
          }
          const double* src = img + (ci * h + iy) * w;
          for (std::size_t ox = 0; ox < g.out_w; ++ox) {
            const long ix = static_cast<long>(ox * stride + kw) - static_cast<long>(pad);
            dst[ox] = (ix < 0 || ix >= static_cast<long>(w)) ? 0.0 : src[ix];
          }
        }
      }
}

inline void col2im_acc(const double* cols, std::size_t c, std::size_t h, std::size_t w, std::size_t k,
                       std::size_t stride, std::size_t pad, const conv_geometry& g, double* img) {
  const std::size_t plane = g.out_h * g.out_w;
  for (std::size_t ci = 0; ci < c; ++ci)
    for (std::size_t kh = 0; kh < k; ++kh)
      for (std::size_t kw = 0; kw < k; ++kw) {
        const double* row = cols + ((ci * k + kh) * k + kw) * plane;
        for (std::size_t oy = 0; oy < g.out_h; ++oy) {
          const long iy = static_cast<long>(oy * stride + kh) - static_cast<long>(pad);
          if (iy < 0 || iy >= static_cast<long>(h)) continue;
          double* dst = img + (ci * h + iy) * w;
          const double* src = row + oy * g.out_w;
          for (std::size_t ox = 0; ox < g.out_w; ++ox) {
            const long ix = static_cast<long>(ox * stride + kw) - static_cast<long>(pad);
            if (ix >= 0 && ix < static_cast<long>(w)) dst[ix] += src[ox];
          }
        }
      }
}

}  // namespace detail

inline tensor conv2d_forward(const tensor& x, const conv_params& p, std::size_t stride = 1, std::size_t pad = 0) {
  detail::check_conv(x, p);
  const std::size_t n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  const std::size_t ko = p.out_channels(), k = p.kernel();
  const conv_geometry g = conv_output_shape(h, w, k, stride, pad);
  const std::size_t plane = g.out_h * g.out_w, kk = c * k * k;
  tensor out({n, ko, g.out_h, g.out_w});
  std::vector<double> cols(kk * plane);
  for (std::size_t s = 0; s < n; ++s) {
    detail::im2col(x.ptr() + s * c * h * w, c, h, w, k, stride, pad, g, cols.data());
    double* o = out.ptr() + s * ko * plane;
    for (std::size_t oc = 0; oc < ko; ++oc) std::fill(o + oc * plane, o + (oc + 1) * plane, p.bias[oc]);
    kernel::gemm_acc(ko, plane, kk, p.weight.ptr(), cols.data(), o);
  }
  return out;
}

struct conv_grads {
  tensor grad_x;  // empty when not requested
  conv_params grad_p;
};

inline conv_grads conv2d_backward(const tensor& x, const conv_params& p, const tensor& grad_out,
                                  std::size_t stride = 1, std::size_t pad = 0, bool need_grad_x = true) {
  detail::check_conv(x, p);
  const std::size_t n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  const std::size_t ko = p.out_channels(), k = p.kernel();
  const conv_geometry g = conv_output_shape(h, w, k, stride, pad);
  require_shape(grad_out, {n, ko, g.out_h, g.out_w}, "conv2d_backward grad_out");
  const std::size_t plane = g.out_h * g.out_w, kk = c * k * k;

  conv_grads r{need_grad_x ? tensor(x.shape()) : tensor(), {tensor(p.weight.shape()), tensor(p.bias.shape())}};
  std::vector<double> cols(kk * plane), gcols;
  if (need_grad_x) gcols.resize(kk * plane);
  for (std::size_t s = 0; s < n; ++s) {
    const double* go = grad_out.ptr() + s * ko * plane;
    detail::im2col(x.ptr() + s * c * h * w, c, h, w, k, stride, pad, g, cols.data());
    for (std::size_t oc = 0; oc < ko; ++oc) {
      double acc = 0;
      for (std::size_t i = 0; i < plane; ++i) acc += go[oc * plane + i];
      r.grad_p.bias[oc] += acc;
    }
    kernel::gemm_nt_acc(ko, plane, kk, go, cols.data(), r.grad_p.weight.ptr());
    if (need_grad_x) {
      std::fill(gcols.begin(), gcols.end(), 0.0);
      kernel::gemm_tn_acc(ko, plane, kk, p.weight.ptr(), go, gcols.data());
      detail::col2im_acc(gcols.data(), c, h, w, k, stride, pad, g, r.grad_x.ptr() + s * c * h * w);
    }
  }
  return r;
}

// ---- ReLU ------------------------------------------------------------------

inline tensor relu_forward(const tensor& x) {
  tensor y = x;
  for (double& v : y.data()) v = v > 0 ? v : 0.0;
  return y;
}

// Gradient is routed where the forward input was strictly positive.
inline tensor relu_backward(const tensor& x, const tensor& grad_out) {
  require_shape(grad_out, x.shape(), "relu_backward grad_out");
  tensor g = grad_out;
  for (std::size_t i = 0; i < g.size(); ++i)
    if (!(x[i] > 0)) g[i] = 0.0;
  return g;
}

// ---- 2x2 max pooling, stride 2 --------------------------------------------

struct maxpool_result {
  tensor out;
  std::vector<std::size_t> argmax;  // flat input index per output element
};

// Ties go to the first maximum in row-major window order.
inline maxpool_result maxpool2x2_forward(const tensor& x) {
  if (x.rank() != 4) throw data_error("maxpool2x2: input must be N x C x H x W");
  const std::size_t n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  if (h % 2 || w % 2) throw data_error("maxpool2x2: spatial extents must be even");
  const std::size_t oh = h / 2, ow = w / 2;
  maxpool_result r{tensor({n, c, oh, ow}), std::vector<std::size_t>(n * c * oh * ow)};
  std::size_t o = 0;
  for (std::size_t s = 0; s < n; ++s)
    for (std::size_t ch = 0; ch < c; ++ch) {
      const std::size_t base = (s * c + ch) * h * w;
      for (std::size_t y = 0; y < oh; ++y)
        for (std::size_t xx = 0; xx < ow; ++xx, ++o) {
          std::size_t best = base + (2 * y) * w + 2 * xx;
          for (std::size_t dy = 0; dy < 2; ++dy)
            for (std::size_t dx = 0; dx < 2; ++dx) {
              const std::size_t i = base + (2 * y + dy) * w + 2 * xx + dx;
              if (x[i] > x[best]) best = i;
            }
          r.out[o] = x[best];
          r.argmax[o] = best;
        }
    }
  return r;
}

inline tensor maxpool2x2_backward(const shape_t& input_shape, const std::vector<std::size_t>& argmax,
                                  const tensor& grad_out) {
  if (grad_out.size() != argmax.size()) throw data_error("maxpool2x2_backward: gradient/argmax size mismatch");
  tensor g(input_shape);
  for (std::size_t o = 0; o < argmax.size(); ++o) g[argmax[o]] += grad_out[o];
  return g;
}

// ---- fully connected -------------------------------------------------------

struct fc_params {
  tensor weight;  // D_out x D_in
  tensor bias;    // D_out

  std::size_t out_dim() const { return weight.dim(0); }
  std::size_t in_dim() const { return weight.dim(1); }
};

inline tensor fc_forward(const tensor& x, const fc_params& p) {
  if (x.rank() != 2 || x.dim(1) != p.in_dim())
    throw data_error("fc: input must be N x " + std::to_string(p.in_dim()) + ", got " + shape_string(x.shape()));
  require_shape(p.bias, {p.out_dim()}, "fc bias");
  const std::size_t n = x.dim(0), din = p.in_dim(), dout = p.out_dim();
  tensor y({n, dout});
  for (std::size_t s = 0; s < n; ++s)
    for (std::size_t o = 0; o < dout; ++o)
      y[s * dout + o] = p.bias[o] + kernel::dot(p.weight.ptr() + o * din, x.ptr() + s * din, din);
  return y;
}

struct fc_grads {
  tensor grad_x;
  fc_params grad_p;
};

inline fc_grads fc_backward(const tensor& x, const fc_params& p, const tensor& grad_out) {
  const std::size_t n = x.dim(0), din = p.in_dim(), dout = p.out_dim();
  require_shape(x, {n, din}, "fc_backward input");
  require_shape(grad_out, {n, dout}, "fc_backward grad_out");
  fc_grads r{tensor({n, din}), {tensor({dout, din}), tensor({dout})}};
  for (std::size_t s = 0; s < n; ++s)
    for (std::size_t o = 0; o < dout; ++o) r.grad_p.bias[o] += grad_out[s * dout + o];
  kernel::gemm_tn_acc(n, din, dout, grad_out.ptr(), x.ptr(), r.grad_p.weight.ptr());
  kernel::gemm_acc(n, din, dout, grad_out.ptr(), p.weight.ptr(), r.grad_x.ptr());
  return r;
}

}  // namespace lflane::nn
