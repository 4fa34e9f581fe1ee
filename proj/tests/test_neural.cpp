#include <gtest/gtest.h>

#include <random>

#include "lflane/gradcheck_suite.hpp"
#include "lflane/neural/layers.hpp"
#include "lflane/neural/lstm.hpp"
#include "lflane/neural/optim.hpp"

using namespace lflane;
using namespace lflane::nn;

namespace {

tensor iota_tensor(shape_t s, double scale = 1.0) {
  tensor t(std::move(s));
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = scale * static_cast<double>(i + 1);
  return t;
}

// Direct six-loop cross-correlation.
tensor naive_conv(const tensor& x, const conv_params& p, std::size_t stride, std::size_t pad) {
  const std::size_t n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  const std::size_t ko = p.weight.dim(0), k = p.weight.dim(2);
  const std::size_t oh = (h + 2 * pad - k) / stride + 1, ow = (w + 2 * pad - k) / stride + 1;
  tensor y({n, ko, oh, ow});
  for (std::size_t s = 0; s < n; ++s)
    for (std::size_t o = 0; o < ko; ++o)
      for (std::size_t i = 0; i < oh; ++i)
        for (std::size_t j = 0; j < ow; ++j) {
          double acc = p.bias[o];
          for (std::size_t ci = 0; ci < c; ++ci)
            for (std::size_t a = 0; a < k; ++a)
              for (std::size_t b = 0; b < k; ++b) {
                const long yy = static_cast<long>(i * stride + a) - static_cast<long>(pad);
                const long xx = static_cast<long>(j * stride + b) - static_cast<long>(pad);
                if (yy < 0 || xx < 0 || yy >= static_cast<long>(h) || xx >= static_cast<long>(w)) continue;
                acc += x.at(s, ci, yy, xx) * p.weight.at(o, ci, a, b);
              }
          y.at(s, o, i, j) = acc;
        }
  return y;
}

}  // namespace

TEST(Conv, IdentityKernelReproducesInput) {
  const tensor x = iota_tensor({1, 1, 3, 3});
  const conv_params p{tensor({1, 1, 1, 1}, 1.0), tensor({1})};
  EXPECT_TRUE(conv2d_forward(x, p) == x);
  const tensor g = iota_tensor({1, 1, 3, 3}, -0.5);
  EXPECT_TRUE(conv2d_backward(x, p, g).grad_x == g);
}

TEST(Conv, AllOnesSumsToNine) {
  const tensor y = conv2d_forward(tensor({1, 1, 3, 3}, 1.0), {tensor({1, 1, 3, 3}, 1.0), tensor({1})});
  ASSERT_EQ(y.shape(), (shape_t{1, 1, 1, 1}));
  EXPECT_DOUBLE_EQ(y[0], 9.0);
}

TEST(Conv, OutputShapeFormula) {
  const tensor y = conv2d_forward(tensor({1, 1, 4, 4}, 0.5), {tensor({3, 1, 2, 2}, 1.0), tensor({3})}, 2, 0);
  EXPECT_EQ(y.shape(), (shape_t{1, 3, 2, 2}));
  for (std::size_t h = 3; h <= 9; ++h)
    for (std::size_t k = 1; k <= 3; ++k)
      for (std::size_t stride = 1; stride <= 3; ++stride)
        for (std::size_t pad = 0; pad <= 2; ++pad) {
          if (h + 2 * pad < k) continue;
          const conv_params p{tensor({2, 1, k, k}, 0.1), tensor({2})};
          const tensor x({1, 1, h, h}, 1.0);
          if ((h + 2 * pad - k) % stride != 0) {
            EXPECT_THROW(conv2d_forward(x, p, stride, pad), data_error);
            continue;
          }
          const std::size_t e = (h + 2 * pad - k) / stride + 1;
          EXPECT_EQ(conv2d_forward(x, p, stride, pad).shape(), (shape_t{1, 2, e, e}));
        }
}

TEST(Conv, MatchesNaiveLoops) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> d(-1, 1);
  auto rnd = [&](shape_t s) {
    tensor t(std::move(s));
    for (double& v : t.data()) v = d(rng);
    return t;
  };
  for (std::size_t stride : {1, 2})
    for (std::size_t pad : {0, 1}) {
      const tensor x = rnd({2, 3, 7, 7});
      const conv_params p{rnd({4, 3, 3, 3}), rnd({4})};
      const tensor a = conv2d_forward(x, p, stride, pad), b = naive_conv(x, p, stride, pad);
      ASSERT_EQ(a.shape(), b.shape());
      for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a[i], b[i], 1e-12);
    }
}

TEST(Conv, ZeroGradOutGivesZeroGradients) {
  const tensor x = iota_tensor({1, 2, 4, 4}, 0.1);
  const conv_params p{iota_tensor({3, 2, 3, 3}, 0.01), iota_tensor({3})};
  const conv_grads g = conv2d_backward(x, p, tensor({1, 3, 4, 4}), 1, 1);
  for (double v : g.grad_x.data()) EXPECT_EQ(v, 0.0);
  for (double v : g.grad_p.weight.data()) EXPECT_EQ(v, 0.0);
  for (double v : g.grad_p.bias.data()) EXPECT_EQ(v, 0.0);
}

TEST(Conv, RejectsIncompatibleShapes) {
  EXPECT_THROW(conv2d_forward(tensor({1, 2, 4, 4}), {tensor({1, 1, 3, 3}), tensor({1})}), data_error);
  EXPECT_THROW(conv2d_forward(tensor({1, 1, 4, 4}), {tensor({1, 1, 3, 3}), tensor({1})}, 0, 0), data_error);
}

TEST(Relu, Definition) {
  const tensor y = relu_forward(tensor({3}, std::vector<double>{-1, 0, 2}));
  EXPECT_EQ(y, tensor({3}, std::vector<double>({0, 0, 2})));
  const tensor g = relu_backward(tensor({3}, std::vector<double>{-1, 0, 2}), tensor({3}, 1.0));
  EXPECT_EQ(g, tensor({3}, std::vector<double>({0, 0, 1})));
}

TEST(MaxPool, RoutesGradientToArgmax) {
  const tensor x({1, 1, 2, 2}, std::vector<double>{1, 2, 3, 4});
  const maxpool_result r = maxpool2x2_forward(x);
  EXPECT_DOUBLE_EQ(r.out[0], 4);
  const tensor g = maxpool2x2_backward(x.shape(), r.argmax, tensor({1, 1, 1, 1}, 1.0));
  EXPECT_EQ(g, tensor({1, 1, 2, 2}, std::vector<double>({0, 0, 0, 1})));
}

TEST(MaxPool, TiesGoToFirstRowMajorMaximum) {
  const tensor x({1, 1, 2, 2}, std::vector<double>{0, 5, 5, 5});
  EXPECT_EQ(maxpool2x2_forward(x).argmax[0], 1u);
  EXPECT_THROW(maxpool2x2_forward(tensor({1, 1, 3, 2})), data_error);
}

TEST(Fc, IdentityWeights) {
  tensor w({3, 3});
  for (std::size_t i = 0; i < 3; ++i) w[i * 3 + i] = 1;
  const tensor x({2, 3}, std::vector<double>{1, -2, 3, 0.5, 0, -1});
  EXPECT_EQ(fc_forward(x, {w, tensor({3})}), x);
  EXPECT_THROW(fc_forward(tensor({2, 4}), {w, tensor({3})}), data_error);
}

TEST(Lstm, ZeroWeightsGiveZeroState) {
  const lstm_params p{tensor({8, 3}), tensor({8, 2}), tensor({8})};
  const lstm_step s = lstm_cell_forward(tensor({1, 3}), tensor({1, 2}), tensor({1, 2}), p);
  for (double v : s.cache.i.data()) EXPECT_DOUBLE_EQ(v, 0.5);
  for (double v : s.cache.f.data()) EXPECT_DOUBLE_EQ(v, 0.5);
  for (double v : s.cache.o.data()) EXPECT_DOUBLE_EQ(v, 0.5);
  for (double v : s.cache.g.data()) EXPECT_DOUBLE_EQ(v, 0.0);
  for (double v : s.c.data()) EXPECT_DOUBLE_EQ(v, 0.0);
  for (double v : s.h.data()) EXPECT_DOUBLE_EQ(v, 0.0);
}

TEST(Lstm, SaturatedForgetGateCarriesMemory) {
  const std::size_t hd = 3;
  lstm_params p{tensor({4 * hd, 2}), tensor({4 * hd, hd}), tensor({4 * hd}, -10.0)};
  for (std::size_t j = 0; j < hd; ++j) p.b[hd + j] = 10.0;
  const tensor c_prev({1, hd}, std::vector<double>{0.7, -1.2, 3.0});
  const lstm_step s = lstm_cell_forward(tensor({1, 2}, 0.3), tensor({1, hd}, 0.1), c_prev, p);
  for (std::size_t j = 0; j < hd; ++j) EXPECT_LT(std::abs(s.c[j] - c_prev[j]), 1e-3);
}

TEST(Lstm, BatchRowsAreIndependent) {
  std::mt19937_64 rng(8);
  const lstm_params p = random_lstm(3, 4, rng);
  const tensor x4 = lflane::detail::random_tensor({4, 3}, rng), h4 = lflane::detail::random_tensor({4, 4}, rng),
               c4 = lflane::detail::random_tensor({4, 4}, rng);
  const lstm_step all = lstm_cell_forward(x4, h4, c4, p);
  for (std::size_t r = 0; r < 4; ++r) {
    auto row = [&](const tensor& t, std::size_t d) {
      return tensor({1, d}, std::vector<double>(t.data().begin() + r * d, t.data().begin() + (r + 1) * d));
    };
    const lstm_step one = lstm_cell_forward(row(x4, 3), row(h4, 4), row(c4, 4), p);
    for (std::size_t j = 0; j < 4; ++j) EXPECT_EQ(one.h[j], all.h[r * 4 + j]);
  }
}

TEST(Lstm, SingleStepBpttEqualsCellBackward) {
  std::mt19937_64 rng(2);
  const lstm_params p = random_lstm(3, 4, rng);
  const tensor x = lflane::detail::random_tensor({2, 3}, rng), gh = lflane::detail::random_tensor({2, 4}, rng);
  const lstm_step s = lstm_cell_forward(x, tensor({2, 4}), tensor({2, 4}), p);
  const bptt_result b = lstm_backward_through_time({s.cache}, p, gh);
  lstm_param_grads acc = zero_lstm_grads(p);
  const lstm_cell_grads g = lstm_cell_backward(s.cache, p, gh, tensor({2, 4}), acc);
  EXPECT_EQ(b.grad_inputs[0], g.grad_x);
  EXPECT_EQ(b.grad_p.w, acc.w);
  EXPECT_EQ(b.grad_p.u, acc.u);
  EXPECT_EQ(b.grad_p.b, acc.b);
}

TEST(Lstm, ZeroOutputGradientGivesZeroParameterGradients) {
  std::mt19937_64 rng(4);
  const lstm_params p = random_lstm(3, 4, rng);
  std::vector<lstm_cache> caches;
  tensor h({1, 4}), c({1, 4});
  for (int t = 0; t < 3; ++t) {
    lstm_step s = lstm_cell_forward(lflane::detail::random_tensor({1, 3}, rng), h, c, p);
    h = s.h;
    c = s.c;
    caches.push_back(s.cache);
  }
  const bptt_result b = lstm_backward_through_time(caches, p, tensor({1, 4}));
  for (const tensor* t : {&b.grad_p.w, &b.grad_p.u, &b.grad_p.b})
    for (double v : t->data()) EXPECT_EQ(v, 0.0);
  EXPECT_THROW(lstm_backward_through_time({}, p, tensor({1, 4})), data_error);
}

TEST(Loss, HalfMseValues) {
  const tensor t({1, 20}, 0.3);
  const loss_result same = half_mse_loss(t, t);
  EXPECT_EQ(same.loss, 0.0);
  for (double v : same.grad.data()) EXPECT_EQ(v, 0.0);
  tensor p = t;
  p[0] += 1;
  const loss_result one = half_mse_loss(p, t);
  EXPECT_DOUBLE_EQ(one.loss, 0.5);
  EXPECT_DOUBLE_EQ(one.grad[0], 1.0);
  tensor p2({2, 20}), t2({2, 20}, 0.3);
  for (std::size_t i = 0; i < 20; ++i) p2[i] = p2[20 + i] = p[i];
  EXPECT_DOUBLE_EQ(half_mse_loss(p2, t2).loss, 0.5);
  EXPECT_THROW(half_mse_loss(tensor({1, 20}), tensor({1, 19})), data_error);
}

TEST(Adam, FirstStepMovesByLearningRate) {
  std::vector<double> p{0.0}, g{1.0};
  adam_state s = make_adam_state({std::span<double>(p)});
  adam_step({std::span<double>(p)}, {std::span<const double>(g)}, s, 1e-3);
  EXPECT_LT(std::abs(p[0] + 1e-3), 1e-6);
  EXPECT_EQ(s.step, 1);
}

TEST(Adam, ZeroGradientIsNoOp) {
  std::vector<double> p{0.25, -3.0}, g{0.0, 0.0};
  adam_state s = make_adam_state({std::span<double>(p)});
  for (int i = 0; i < 3; ++i) adam_step({std::span<double>(p)}, {std::span<const double>(g)}, s, 1e-2);
  EXPECT_EQ(p, (std::vector<double>{0.25, -3.0}));
  EXPECT_EQ(s.step, 3);
}

TEST(Adam, ConstantSignGradientMovesMonotonically) {
  std::vector<double> p{1.0}, g{0};
  adam_state s = make_adam_state({std::span<double>(p)});
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> mag(0.1, 5.0);
  double prev = p[0];
  for (int i = 0; i < 10; ++i) {
    g[0] = -mag(rng);
    adam_step({std::span<double>(p)}, {std::span<const double>(g)}, s, 1e-2);
    EXPECT_GT(p[0], prev);
    prev = p[0];
  }
}

TEST(Adam, RejectsShapeMismatch) {
  std::vector<double> p{0.0, 1.0}, g{1.0};
  adam_state s = make_adam_state({std::span<double>(p)});
  EXPECT_THROW(adam_step({std::span<double>(p)}, {std::span<const double>(g)}, s, 1e-3), data_error);
}

TEST(Schedule, StepDecay) {
  const lr_schedule s;
  EXPECT_DOUBLE_EQ(lr_at_epoch(s, 0), 3e-4);
  EXPECT_DOUBLE_EQ(lr_at_epoch(s, 19), 3e-4);
  EXPECT_DOUBLE_EQ(lr_at_epoch(s, 20), 3e-5);
  EXPECT_NEAR(lr_at_epoch(s, 40), 3e-6, 1e-18);
  double prev = lr_at_epoch(s, 0);
  for (int e = 1; e < 100; ++e) {
    const double lr = lr_at_epoch(s, e);
    EXPECT_LE(lr, prev);
    EXPECT_NEAR(lr, 3e-4 * std::pow(0.1, e / 20), 1e-18);
    prev = lr;
  }
  EXPECT_THROW(lr_at_epoch(s, -1), usage_error);
}

// ---- finite differences ----------------------------------------------------------

TEST(GradCheck, ReportsMismatchWithoutThrowing) {
  std::vector<double> x{1.0, 2.0};
  const std::vector<double> wrong{0.0, 0.0};
  const grad_check_report r = grad_check([&] { return x[0] * x[0] + 3 * x[1]; }, {{"x", x, wrong}});
  EXPECT_FALSE(r.passed(1e-4));
  EXPECT_NEAR(r.max_rel_error(), 1.0, 1e-6);
  EXPECT_EQ(x, (std::vector<double>{1.0, 2.0}));
}

TEST(GradCheck, ReluAwayFromKinkIsExact) {
  std::vector<double> x{-0.7, 0.4, 1.3};
  tensor g = relu_backward(tensor({3}, x), tensor({3}, 1.0));
  const grad_check_report r = grad_check(
      [&] {
        const tensor y = relu_forward(tensor({3}, x));
        double s = 0;
        for (double v : y.data()) s += v;
        return s;
      },
      {{"x", x, g.data()}});
  EXPECT_LT(r.max_rel_error(), 1e-9);
}

class LayerGradients : public ::testing::TestWithParam<unsigned long long> {};

TEST_P(LayerGradients, AgreeWithCentralDifferences) {
  const unsigned long long seed = GetParam();
  const double tol = 1e-4;
  EXPECT_LT(check_conv(seed, 1, 1, 1e-5).max_rel_error(), tol);
  EXPECT_LT(check_conv(seed, 2, 0, 1e-5).max_rel_error(), tol);
  EXPECT_LT(check_fc(seed, 1e-5).max_rel_error(), tol);
  EXPECT_LT(check_relu_chain(seed, 1e-5).max_rel_error(), tol);
  EXPECT_LT(check_maxpool(seed, 1e-5).max_rel_error(), tol);
  EXPECT_LT(check_lstm_cell(seed, 1e-5).max_rel_error(), tol);
  EXPECT_LT(check_bptt(seed, 3, 1e-5).max_rel_error(), tol);
  EXPECT_LT(check_bptt(seed, 6, 1e-5).max_rel_error(), tol);
  EXPECT_LT(check_conv_chain(seed, 1e-5).max_rel_error(), tol);
}

INSTANTIATE_TEST_SUITE_P(Seeds, LayerGradients, ::testing::Values(1ull, 2ull, 3ull, 17ull, 1234ull));

TEST(ModelGradients, FullModelsAgreeWithCentralDifferences) {
  for (unsigned long long seed : {1ull, 5ull})
    for (modality m : {modality::regular2d, modality::lf_single, modality::lf_temporal})
      EXPECT_LT(check_full_model(seed, m, 1e-5).max_rel_error(), 1e-4) << to_string(m) << " seed " << seed;
}
