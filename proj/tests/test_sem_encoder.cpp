#include "oracles.hpp"

#include "pstx/sem_encoder.hpp"

#include <gtest/gtest.h>

using namespace pstx;
using oracle::grad_check;
using oracle::random_tensor;

namespace {

std::vector<Tensor> tensors(const ParamList& ps) {
  std::vector<Tensor> out;
  for (const auto& p : ps) out.push_back(p.tensor);
  return out;
}

}  // namespace

TEST(Rem, ConstantAttentionScalesByOneAndAHalf) {
  CounterRng rng(1);
  Rem rem(3, 4, false, rng);
  rem.attention.weight.mutable_value().setZero();
  rem.attention.bias.mutable_value().setZero();  // sigmoid(0) = 0.5
  auto y = random_tensor({1, 3, 8, 8}, 2, 1, false);
  const auto out = rem(y, Tensor::zeros({1, 3, 8, 8}));
  const auto y_hat = rem.down_y(y);
  EXPECT_LT((out.y.value() - 1.5 * y_hat.value()).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Rem, ZeroAttentionPassesThrough) {
  CounterRng rng(3);
  Rem rem(3, 4, true, rng);
  rem.attention.weight.mutable_value().setZero();
  rem.attention.bias.mutable_value().setConstant(-800.0);
  auto y = random_tensor({1, 3, 8, 8}, 4, 1, false), r = random_tensor({1, 3, 8, 8}, 5, 1, false);
  const auto out = rem(y, r);
  EXPECT_LT((out.y.value() - rem.down_y(y).value()).cwiseAbs().maxCoeff(), 1e-12);
  // Last REM: r_{j+1} is r_hat itself.
  EXPECT_EQ((out.r.value() - rem.down_r(r).value()).cwiseAbs().maxCoeff(), 0.0);
}

TEST(Rem, HalvesSpatialDims) {
  CounterRng rng(6);
  Rem rem(3, 8, false, rng);
  const auto out = rem(random_tensor({2, 3, 32, 32}, 7, 1, false), random_tensor({2, 3, 32, 32}, 8, 1, false));
  EXPECT_EQ(out.y.shape(), (Shape{2, 8, 16, 16}));
  EXPECT_EQ(out.r.shape(), (Shape{2, 8, 16, 16}));
  EXPECT_GT(out.attention_map.value().minCoeff(), 0.0);
  EXPECT_LT(out.attention_map.value().maxCoeff(), 1.0);
  EXPECT_THROW(rem(random_tensor({1, 3, 8, 8}, 9, 1, false), random_tensor({1, 3, 4, 4}, 9, 1, false)),
               DimensionError);
}

TEST(Encoder, OutputShapeForDefaultWidths) {
  CounterRng rng(10);
  SemanticEncoder enc(3, {16, 32, 64, 32}, rng);
  auto x = random_tensor({1, 3, 32, 32}, 11, 1, false);
  const auto out = enc(x, Tensor::zeros({1, 3, 32, 32}));
  EXPECT_EQ(out.s.shape(), (Shape{1, 32, 2, 2}));
  EXPECT_EQ(out.r.shape(), (Shape{1, 32, 2, 2}));
}

TEST(Encoder, RemGradientMatchesFiniteDifferences) {
  CounterRng rng(12);
  Rem rem(2, 3, false, rng);
  auto y = random_tensor({1, 2, 4, 4}, 13), r = random_tensor({1, 2, 4, 4}, 14);
  ParamList ps;
  rem.collect(ps, "rem");
  auto params = tensors(ps);
  params.push_back(y);
  params.push_back(r);
  const auto wy = random_tensor({1, 3, 2, 2}, 15, 1, false), wr = random_tensor({1, 3, 2, 2}, 16, 1, false);
  const auto rep = grad_check([&] {
    const auto o = rem(y, r);
    return sum(o.y * wy) + sum(o.r * wr);
  }, params);
  EXPECT_LT(rep.max_rel_error, 1e-4);
}

TEST(Encoder, EveryParameterReceivesGradient) {
  CounterRng rng(17);
  SemanticEncoder enc(3, {4, 4, 4, 4}, rng);
  ParamList ps;
  enc.collect(ps, "enc");
  auto x = random_tensor({1, 3, 16, 16}, 18, 1, false), xr = random_tensor({1, 3, 16, 16}, 19, 0.1, false);
  const auto out = enc(x, xr);
  backward(sum(out.s * random_tensor(out.s.shape(), 20, 1, false)) + sum(out.r * random_tensor(out.r.shape(), 21, 1, false)));
  for (const auto& p : ps) {
    ASSERT_TRUE(p.tensor.has_grad()) << p.name;
    EXPECT_GT(p.tensor.grad().cwiseAbs().maxCoeff(), 0.0) << p.name;
  }
}

TEST(Encoder, AttentionIsLocalToResidualSupport) {
  // Non-negative attention weights and a residual supported on a corner:
  // the enhancement y2 - y_hat vanishes outside that corner's receptive field.
  CounterRng rng(22);
  Rem rem(3, 4, false, rng);
  rem.attention.bias.mutable_value().setConstant(-1e3);
  rem.attention.weight.mutable_value() = rem.attention.weight.value().cwiseAbs();
  for (auto* c : {&rem.down_r.first, &rem.down_r.second}) {
    c->bias.mutable_value().setZero();
    c->weight.mutable_value() = c->weight.value().cwiseAbs();
  }
  auto y = random_tensor({1, 3, 16, 16}, 23, 1, false);
  Eigen::VectorXd rv = Eigen::VectorXd::Zero(3 * 256);
  for (int c = 0; c < 3; ++c) rv[c * 256 + 0] = 5e5;  // pixel (0,0)
  const auto out = rem(y, Tensor::from({1, 3, 16, 16}, rv));
  const auto diff = out.y.value() - rem.down_y(y).value();
  // (0,0) reaches rows/cols <= 1 after the two down convs and <= 2 after the attention conv.
  for (int c = 0; c < 4; ++c)
    for (int i = 0; i < 8; ++i)
      for (int j = 0; j < 8; ++j)
        if (i > 2 || j > 2) EXPECT_EQ(diff[(c * 8 + i) * 8 + j], 0.0) << c << "," << i << "," << j;
  EXPECT_GT(diff.cwiseAbs().maxCoeff(), 0.0);
}
