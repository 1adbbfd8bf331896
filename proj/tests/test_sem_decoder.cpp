#include "oracles.hpp"

#include "pstx/sem_decoder.hpp"

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

TEST(Decoder, LatentShapes) {
  CounterRng rng(1);
  SemanticDecoder dec(DecoderConfig{}, rng);
  const auto u = dec.extract_latents(random_tensor({1, 3, 32, 32}, 2, 1, false));
  ASSERT_EQ(u.size(), 5u);
  EXPECT_EQ(u[0].shape(), (Shape{1, 16, 32, 32}));
  EXPECT_EQ(u[1].shape(), (Shape{1, 16, 16, 16}));
  EXPECT_EQ(u[2].shape(), (Shape{1, 32, 8, 8}));
  EXPECT_EQ(u[3].shape(), (Shape{1, 64, 4, 4}));
  EXPECT_EQ(u[4].shape(), (Shape{1, 32, 2, 2}));
}

TEST(Decoder, OutputInUnitIntervalWithInputDims) {
  CounterRng rng(3);
  SemanticDecoder dec(DecoderConfig{}, rng);
  DecoderTrace trace;
  const auto x = dec(random_tensor({2, 3, 16, 16}, 4, 1, false), random_tensor({2, 32, 1, 1}, 5, 1, false), 7.0,
                     &trace);
  EXPECT_EQ(x.shape(), (Shape{2, 3, 16, 16}));
  EXPECT_GT(x.value().minCoeff(), 0.0);
  EXPECT_LT(x.value().maxCoeff(), 1.0);
  EXPECT_EQ(trace.fusion.size(), 4u);
  EXPECT_EQ(trace.latents.size(), 5u);
  EXPECT_THROW(dec(random_tensor({2, 3, 16, 16}, 4, 1, false), random_tensor({2, 16, 1, 1}, 5, 1, false), 7.0),
               DimensionError);
}

TEST(Pagnet, WeightsSumToOneAcrossSnrs) {
  CounterRng rng(6);
  Pagnet p(8, rng);
  const auto v = random_tensor({2, 8, 5, 5}, 7, 2, false), u = random_tensor({2, 8, 5, 5}, 8, 2, false);
  for (int snr = 0; snr <= 20; ++snr) {
    const auto o = p(v, u, snr);
    const Eigen::VectorXd s = o.weight_v.value() + o.weight_u.value();
    EXPECT_LT((s.array() - 1.0).abs().maxCoeff(), 1e-9) << snr;
    EXPECT_GE(o.weight_v.value().minCoeff(), 0.0);
  }
}

TEST(Pagnet, IdenticalStreamsWithTiedConvsSplitEvenly) {
  CounterRng rng(9);
  Pagnet p(4, rng);
  p.conv_u.weight.mutable_value() = p.conv_v.weight.value();
  p.conv_u.bias.mutable_value() = p.conv_v.bias.value();
  const auto v = random_tensor({1, 4, 3, 3}, 10, 1, false);
  const auto o = p(v, v, 12.0);
  EXPECT_LT((o.weight_v.value().array() - 0.5).abs().maxCoeff(), 1e-12);
  EXPECT_LT((o.fused.value() - v.value()).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Pagnet, ZeroScoringHeadGivesUniformWeights) {
  CounterRng rng(11);
  Pagnet p(4, rng);
  p.fc.weight.mutable_value().setZero();
  const auto v = random_tensor({1, 4, 3, 3}, 12, 1, false), u = random_tensor({1, 4, 3, 3}, 13, 1, false);
  const auto o = p(v, u, 3.0);
  EXPECT_LT((o.weight_u.value().array() - 0.5).abs().maxCoeff(), 1e-12);
  const Eigen::VectorXd expect = 0.5 * (v.value() + u.value());
  EXPECT_LT((o.fused.value() - expect).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Pagnet, SaturatedLogitsKeepBothStreams) {
  CounterRng rng(30);
  Pagnet p(4, rng);
  p.fc.weight.mutable_value() *= 1e4;
  const auto v = random_tensor({1, 4, 3, 3}, 31, 5, false), u = random_tensor({1, 4, 3, 3}, 32, 5, false);
  const auto o = p(v, u, 8.0);
  const double floor = 1.0 / (1.0 + std::exp(2.0 * kPagnetLogitBound));
  EXPECT_GE(o.weight_v.value().minCoeff(), floor - 1e-12);
  EXPECT_GE(o.weight_u.value().minCoeff(), floor - 1e-12);
  // Scores this large pin the clipped logits to the bound.
  EXPECT_LT(o.weight_v.value().minCoeff(), floor + 1e-3);
}

TEST(Pagnet, SnrIndexRoundsAndClamps) {
  EXPECT_EQ(snr_index(-3.0), 0);
  EXPECT_EQ(snr_index(4.4), 4);
  EXPECT_EQ(snr_index(4.6), 5);
  EXPECT_EQ(snr_index(25.0), 20);
}

TEST(Pagnet, InstancesShareNoParameters) {
  CounterRng rng(14);
  SemanticDecoder dec(DecoderConfig{}, rng);
  std::vector<Tensor> all;
  for (int l = 0; l < dec.levels(); ++l) {
    ParamList ps;
    dec.pagnets[l].collect(ps, "p");
    for (const auto& p : ps) all.push_back(p.tensor);
  }
  for (size_t i = 0; i < all.size(); ++i)
    for (size_t j = i + 1; j < all.size(); ++j) EXPECT_FALSE(all[i].same_node(all[j])) << i << "," << j;
}

TEST(Pagnet, GradientMatchesFiniteDifferences) {
  CounterRng rng(15);
  Pagnet p(3, rng);
  ParamList ps;
  p.collect(ps, "p");
  auto v = random_tensor({1, 3, 3, 3}, 16), u = random_tensor({1, 3, 3, 3}, 17);
  auto params = tensors(ps);
  params.push_back(v);
  params.push_back(u);
  const auto w = random_tensor({1, 3, 3, 3}, 18, 1, false);
  const auto rep = grad_check([&] { return sum(p(v, u, 6.0).fused * w); }, params);
  EXPECT_LT(rep.max_rel_error, 1e-4) << rep.worst_param << "[" << rep.worst_index << "] " << rep.worst_analytic << " vs " << rep.worst_numeric;
}

TEST(Rrdb, GradientMatchesFiniteDifferences) {
  CounterRng rng(19);
  Rrdb r(2, 3, 2, 2, rng);
  ParamList ps;
  r.collect(ps, "r");
  auto x = random_tensor({1, 2, 4, 4}, 20);
  auto params = tensors(ps);
  params.push_back(x);
  const auto w = random_tensor({1, 3, 4, 4}, 21, 1, false);
  const auto rep = grad_check([&] { return sum(r(x) * w); }, params);
  EXPECT_LT(rep.max_rel_error, 1e-4) << rep.worst_param << "[" << rep.worst_index << "] " << rep.worst_analytic << " vs " << rep.worst_numeric;
}

TEST(Decoder, UpBlockAndLatentDownGradients) {
  CounterRng rng(22);
  UpBlock up(3, 2, false, rng);
  LatentDown down(2, 3, rng);
  ParamList ps;
  up.collect(ps, "up");
  down.collect(ps, "down");
  auto x = random_tensor({1, 2, 4, 4}, 23);
  auto params = tensors(ps);
  params.push_back(x);
  const auto w = random_tensor({1, 2, 4, 4}, 24, 1, false);
  const auto rep = grad_check([&] { return sum(up(down(x)) * w); }, params);
  EXPECT_LT(rep.max_rel_error, 1e-4) << rep.worst_param << "[" << rep.worst_index << "] " << rep.worst_analytic << " vs " << rep.worst_numeric;
}
