#include "oracles.hpp"

#include "pstx/layers.hpp"
#include "pstx/optim.hpp"

#include <gtest/gtest.h>

using namespace pstx;
using oracle::grad_check;
using oracle::random_tensor;

namespace {
constexpr double kTol = 1e-4;

Tensor weighted_sum(const Tensor& y, std::uint64_t seed) {
  return sum(y * random_tensor(y.shape(), seed, 1.0, false));
}
}  // namespace

TEST(Tensor, ShapeMismatchIsDimensionError) {
  auto a = Tensor::zeros({2, 3});
  auto b = Tensor::zeros({3, 2});
  EXPECT_THROW(add(a, b), DimensionError);
  EXPECT_THROW(Tensor::from({2, 2}, Eigen::VectorXd::Zero(3)), DimensionError);
}

TEST(Tensor, BackwardNeedsScalarAttachedLossAndRunsOnce) {
  auto w = random_tensor({3}, 1);
  EXPECT_THROW(backward(w * w), GraphError);
  EXPECT_THROW(backward(sum(Tensor::zeros({3}))), GraphError);
  auto loss = sum(w * w);
  backward(loss);
  EXPECT_THROW(backward(loss), GraphError);
}

TEST(Tensor, SharedSubexpressionAccumulates) {
  auto w = Tensor::from({1}, Eigen::VectorXd::Constant(1, 3.0), true);
  auto y = w * w;
  backward(sum(y + y));
  EXPECT_DOUBLE_EQ(w.grad()[0], 12.0);
}

TEST(Tensor, NoGradGuardRecordsNothing) {
  auto w = random_tensor({2}, 2);
  NoGradGuard g;
  EXPECT_FALSE(sum(w * w).requires_grad());
}

TEST(GradCheck, ElementwiseOps) {
  auto a = random_tensor({2, 5}, 3), b = random_tensor({2, 5}, 4);
  auto pos = Tensor::from({2, 5}, random_tensor({2, 5}, 5, 1, false).value().cwiseAbs().array() + 0.5, true);
  EXPECT_LT(grad_check([&] { return weighted_sum(a + b, 10) + weighted_sum(a - b, 11) + weighted_sum(a * b, 12); }, {a, b})
                .max_rel_error,
            kTol);
  EXPECT_LT(grad_check([&] { return weighted_sum(sigmoid(a), 13) + weighted_sum(tanh(b), 14); }, {a, b}).max_rel_error, kTol);
  EXPECT_LT(grad_check([&] { return weighted_sum(softplus(a), 15) + weighted_sum(leaky_relu(b, 0.1), 16); }, {a, b})
                .max_rel_error,
            kTol);
  EXPECT_LT(grad_check([&] { return weighted_sum(log2(pos), 17) + weighted_sum(square(a), 18); }, {a, pos}).max_rel_error,
            kTol);
  EXPECT_LT(grad_check([&] { return mean(scale(add_scalar(a, 0.3), 2.0)) + mse(a, b); }, {a, b}).max_rel_error, kTol);
}

TEST(GradCheck, LinearAlgebra) {
  auto a = random_tensor({3, 4}, 20), b = random_tensor({4, 2}, 21);
  EXPECT_LT(grad_check([&] { return weighted_sum(matmul(a, b), 22); }, {a, b}).max_rel_error, kTol);
  auto x = random_tensor({5, 4}, 23), w = random_tensor({3, 4}, 24), bias = random_tensor({3}, 25);
  EXPECT_LT(grad_check([&] { return weighted_sum(linear(x, w, bias), 26); }, {x, w, bias}).max_rel_error, kTol);
  auto g1 = random_tensor({2, 3, 2}, 27), g2 = random_tensor({2, 2, 4}, 28), gb = random_tensor({2, 3}, 29);
  EXPECT_LT(grad_check([&] { return weighted_sum(mul_bcast(add_bcast(bmm(g1, g2), gb), gb), 30); }, {g1, g2, gb})
                .max_rel_error,
            kTol);
  EXPECT_LT(grad_check([&] { return weighted_sum(transpose(a), 31); }, {a}).max_rel_error, kTol);
}

TEST(GradCheck, ConvolutionsAndNormalization) {
  auto x = random_tensor({2, 3, 5, 5}, 40), w = random_tensor({4, 3, 3, 3}, 41), b = random_tensor({4}, 42);
  EXPECT_LT(grad_check([&] { return weighted_sum(conv2d(x, w, b, 2, 1), 43); }, {x, w, b}).max_rel_error, kTol);
  auto wt = random_tensor({3, 2, 4, 4}, 44), bt = random_tensor({2}, 45);
  EXPECT_LT(grad_check([&] { return weighted_sum(conv_transpose2d(x, wt, bt, 2, 1), 46); }, {x, wt, bt}).max_rel_error,
            kTol);
  Gdn g(3, false), ig(3, true);
  EXPECT_LT(grad_check([&] { return weighted_sum(g(x), 47); }, {x, g.beta_raw, g.gamma_raw}).max_rel_error, kTol);
  EXPECT_LT(grad_check([&] { return weighted_sum(ig(x), 48); }, {x, ig.beta_raw, ig.gamma_raw}).max_rel_error, kTol);
  PRelu pr(3);
  EXPECT_LT(grad_check([&] { return weighted_sum(pr(x), 49); }, {x, pr.slope}).max_rel_error, kTol);
}

TEST(GradCheck, ShapeAndBroadcastOps) {
  auto a = random_tensor({2, 3, 2, 2}, 60), b = random_tensor({2, 3, 2, 2}, 61);
  auto v = random_tensor({3}, 62), px = random_tensor({2, 1, 2, 2}, 63);
  EXPECT_LT(grad_check([&] {
              auto st = softmax_per_pixel(stack({a, b}));
              return weighted_sum(select(st, 0), 64) + weighted_sum(select(st, 1), 65);
            },
                       {a, b})
                .max_rel_error,
            kTol);
  EXPECT_LT(grad_check([&] { return weighted_sum(mul_channel(a, v), 66) + weighted_sum(mul_pixel(b, px), 67); },
                       {a, b, v, px})
                .max_rel_error,
            kTol);
  EXPECT_LT(grad_check([&] {
              auto c = concat_channels(a, b);
              return weighted_sum(slice_channels(c, 2, 3), 68) +
                     weighted_sum(from_patches(to_patches(a), 2, 2, 2), 69) +
                     weighted_sum(concat0({slice0(a, 1, 1), slice0(b, 0, 1)}), 70) + weighted_sum(reshape(a, {24}), 71);
            },
                       {a, b})
                .max_rel_error,
            kTol);
}

TEST(GradCheck, ProbabilityOps) {
  auto x = random_tensor({12}, 80, 2.0), mu = random_tensor({12}, 81);
  auto sigma = Tensor::from({12}, random_tensor({12}, 82, 1, false).value().cwiseAbs().array() + 0.3, true);
  EXPECT_LT(grad_check([&] { return weighted_sum(gaussian_likelihood(x, mu, sigma), 83); }, {x, mu, sigma}).max_rel_error,
            kTol);
  auto lo = random_tensor({8}, 84), hi = Tensor::from({8}, lo.value().array() + 0.7, true);
  EXPECT_LT(grad_check([&] { return weighted_sum(logistic_interval(lo, hi), 85); }, {lo, hi}).max_rel_error, kTol);
  auto rows = random_tensor({3, 5}, 86);
  EXPECT_LT(grad_check([&] { return weighted_sum(normalize_power_rows(rows, 1.0), 87); }, {rows}).max_rel_error, kTol);
  auto c = random_tensor({6}, 88);
  EXPECT_LT(grad_check([&] { return weighted_sum(clamp_min(c, -0.2), 89); }, {c}).max_rel_error, kTol);
}

TEST(Conv, MatchesDirectLoops) {
  auto x = random_tensor({2, 3, 7, 6}, 100, 1, false), w = random_tensor({4, 3, 3, 3}, 101, 1, false);
  auto b = random_tensor({4}, 102, 1, false);
  for (int stride : {1, 2}) {
    auto y = conv2d(x, w, b, stride, 1);
    EXPECT_LT((y.value() - oracle::naive_conv2d(x, w, b, stride, 1)).cwiseAbs().maxCoeff(), 1e-12);
  }
  auto wt = random_tensor({3, 2, 4, 4}, 103, 1, false), bt = random_tensor({2}, 104, 1, false);
  auto yt = conv_transpose2d(x, wt, bt, 2, 1);
  EXPECT_EQ(yt.shape(), (Shape{2, 2, 14, 12}));
  EXPECT_LT((yt.value() - oracle::naive_conv_transpose2d(x, wt, bt, 2, 1)).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Conv, TransposeIsAdjoint) {
  // <conv(x), y> == <x, conv_T(y)> with zero bias and the same weights.
  auto x = random_tensor({1, 3, 7, 7}, 110, 1, false), w = random_tensor({5, 3, 3, 3}, 111, 1, false);
  auto zero5 = Tensor::zeros({5}), zero3 = Tensor::zeros({3});
  auto cx = conv2d(x, w, zero5, 2, 1);
  auto y = random_tensor(cx.shape(), 112, 1, false);
  auto ty = conv_transpose2d(y, w, zero3, 2, 1);
  ASSERT_EQ(ty.shape(), x.shape());
  EXPECT_NEAR(cx.value().dot(y.value()), x.value().dot(ty.value()), 1e-10);
}

TEST(Gdn, ParametersStayPositive) {
  Gdn g(2, false);
  g.beta_raw.mutable_value().setConstant(-3.0);
  EXPECT_GT(g.beta().value().minCoeff(), 0.0);
  EXPECT_GE(g.gamma().value().minCoeff(), 0.0);
}

TEST(Gdn, ExactInverseRecoversInput) {
  auto x = random_tensor({1, 3, 4, 4}, 120, 0.5, false);
  Gdn g(3, false);
  auto y = g(x);
  auto back = gdn_invert(y, g.beta(), g.gamma());
  EXPECT_LT((back.value() - x.value()).cwiseAbs().maxCoeff(), 1e-9);
  // One multiplicative step (IGDN) is the first fixed-point iterate.
  auto one = gdn_invert(y, g.beta(), g.gamma(), 1, 0.0);
  Gdn ig(3, true);
  EXPECT_LT((one.value() - ig(y).value()).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Gdn, BetaMustBePositive) {
  auto x = random_tensor({1, 2, 2, 2}, 121, 1, false);
  auto beta = Tensor::from({2}, Eigen::Vector2d(1.0, 0.0));
  EXPECT_THROW(gdn(x, beta, Tensor::zeros({2, 2}), false), ParameterError);
}

TEST(Adam, FirstStepMovesByLearningRate) {
  auto w = Tensor::from({2}, Eigen::Vector2d(1.0, -1.0), true);
  Adam opt({w});
  backward(sum(w * w));
  opt.step(0.1);
  EXPECT_NEAR(w.value()[0], 0.9, 1e-6);
  EXPECT_NEAR(w.value()[1], -0.9, 1e-6);
}

TEST(Adam, PolyDecayEndpoints) {
  EXPECT_DOUBLE_EQ(poly_lr(1e-3, 0, 100), 1e-3);
  EXPECT_DOUBLE_EQ(poly_lr(1e-3, 100, 100), 0.0);
  EXPECT_NEAR(poly_lr(1.0, 50, 100), std::pow(0.5, 0.9), 1e-15);
}

TEST(Rng, PhiloxKnownAnswers) {
  const auto a = CounterRng::block({0, 0, 0, 0}, {0, 0});
  EXPECT_EQ(a, (std::array<std::uint32_t, 4>{0x6627e8d5, 0xe169c58d, 0xbc57ac4c, 0x9b00dbd8}));
  const auto b = CounterRng::block({0xffffffff, 0xffffffff, 0xffffffff, 0xffffffff}, {0xffffffff, 0xffffffff});
  EXPECT_EQ(b, (std::array<std::uint32_t, 4>{0x408f276d, 0x41c83b0e, 0xa20bc7c6, 0x6d5451fd}));
  const auto c = CounterRng::block({0x243f6a88, 0x85a308d3, 0x13198a2e, 0x03707344}, {0xa4093822, 0x299f31d0});
  EXPECT_EQ(c, (std::array<std::uint32_t, 4>{0xd16cfe09, 0x94fdcceb, 0x5001e420, 0x24126ea1}));
}

TEST(Rng, UniformMomentsAndDeterminism) {
  CounterRng r1(42, 7), r2(42, 7), r3(42, 8);
  double mean = 0;
  const int n = 200000;
  bool differs = false;
  for (int i = 0; i < n; ++i) {
    const double u = r1.uniform();
    EXPECT_EQ(u, r2.uniform());
    differs = differs || u != r3.uniform();
    mean += u;
  }
  EXPECT_NEAR(mean / n, 0.5, 0.005);
  EXPECT_TRUE(differs);
}
