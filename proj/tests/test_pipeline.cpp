#include "oracles.hpp"

#include "pstx/pipeline.hpp"
#include "pstx/qpsk.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

using namespace pstx;

namespace {

const fec::ParityCheckMatrix& desk_code() {
  static const auto h = fec::build_qc_ldpc(fec::desk_base_matrix());
  return h;
}

const SemanticModel& tiny_model() {
  static const SemanticModel m(oracle::tiny_model_config(), 5);
  return m;
}

Image test_image(std::uint64_t seed) { return procedural_corpus(1, 16, seed).front(); }

PipelineConfig config(SemanticMode mode, double snr_db) {
  PipelineConfig cfg;
  cfg.mode = mode;
  cfg.channel.snr_db = snr_db;
  return cfg;
}

}  // namespace

TEST(Pipeline, NoiselessConventionalPathIsBitExact) {
  const auto x = test_image(1);
  for (auto mode : {SemanticMode::off, SemanticMode::analog, SemanticMode::adaptive}) {
    const auto res = transmit_image(x, config(mode, 300.0), &tiny_model(), desk_code(), 7);
    const auto expect = codec::decompress(codec::compress(quantize_levels(x), codec::QualityFactor(30)));
    EXPECT_FALSE(res.corrupted);
    EXPECT_TRUE(res.x_c_hat == expect);
    EXPECT_TRUE(res.x_c == expect);
    if (mode == SemanticMode::off) EXPECT_TRUE(res.x_hat == expect);
  }
}

TEST(Pipeline, AccountingIdentity) {
  for (auto mode : {SemanticMode::off, SemanticMode::analog, SemanticMode::adaptive}) {
    for (double snr : {2.0, 10.0}) {
      const auto x = test_image(2);
      const auto res = transmit_image(x, config(mode, snr), &tiny_model(), desk_code(), 3);
      const auto& f = res.frame;
      EXPECT_EQ(f.k, 16 * 16 * 3);
      long long sent = 0, info = 0;
      for (const auto& s : f.segments) {
        EXPECT_EQ(s.info_bits + s.pad_bits, desk_code().info_bits());
        EXPECT_EQ(s.sent_bits, desk_code().cols() - s.pad_bits);
        sent += s.sent_bits;
        info += s.info_bits;
      }
      EXPECT_EQ(info, f.codec_bits);
      EXPECT_EQ(f.m, (sent + 1) / 2);
      EXPECT_EQ(f.semantic_symbols, (f.semantic_reals + 1) / 2);
      EXPECT_EQ(f.side_symbols, (f.side_bits + 1) / 2);
      EXPECT_EQ(f.n(), f.m + f.semantic_symbols + f.side_symbols);
      EXPECT_EQ(f.cbr(), static_cast<double>(f.m + f.semantic_symbols + f.side_symbols) / f.k);
      if (mode == SemanticMode::adaptive) {
        EXPECT_EQ(f.semantic_reals, std::accumulate(f.alpha_bar.begin(), f.alpha_bar.end(), 0LL));
        EXPECT_EQ(f.side_bits, static_cast<long long>(f.alpha_bar.size()) * tiny_model().config.rates.side_bits());
      } else if (mode == SemanticMode::analog) {
        EXPECT_EQ(f.semantic_reals, tiny_model().config.latent_channels());
        EXPECT_EQ(f.side_bits, 0);
      } else {
        EXPECT_EQ(f.semantic_reals, 0);
      }
    }
  }
}

TEST(Pipeline, TransmittedVectorsHaveTargetPower) {
  CounterRng rng(4);
  std::vector<std::uint8_t> bits(1000);
  for (auto& b : bits) b = rng.uniform() < 0.5;
  for (double p : {1.0, 2.5}) {
    const auto z = normalize_power(fec::qpsk_modulate(bits), p);
    double e = 0;
    for (const auto& v : z) e += std::norm(v);
    EXPECT_LT(std::abs(e / z.size() - p), 1e-9);
    const auto s = oracle::random_tensor({1, 2, 1, 1}, 5, 3.0, false);
    RateAllocation a;
    a.alpha_bar = {3};
    a.height = a.width = 1;
    const auto sym = normalize_power(ra_encode(s, a, tiny_model().ra), p);
    e = 0;
    for (const auto& v : sym) e += std::norm(v);
    EXPECT_LT(std::abs(e / sym.size() - p), 1e-9);
  }
}

TEST(Pipeline, SeededRunsAreBitIdentical) {
  const auto x = test_image(3);
  for (auto kind : {ChannelKind::awgn, ChannelKind::rayleigh_block}) {
    auto cfg = config(SemanticMode::adaptive, 4.0);
    cfg.channel.kind = kind;
    const auto a = transmit_image(x, cfg, &tiny_model(), desk_code(), 11);
    const auto b = transmit_image(x, cfg, &tiny_model(), desk_code(), 11);
    EXPECT_TRUE(a.x_hat == b.x_hat);
    EXPECT_TRUE(a.x_c_hat == b.x_c_hat);
    EXPECT_EQ(a.corrupted, b.corrupted);
    const auto c = transmit_image(x, cfg, &tiny_model(), desk_code(), 12);
    EXPECT_FALSE(a.x_hat == c.x_hat);
  }
}

TEST(Pipeline, ResidualIdentityIsExact) {
  const auto x = quantize_levels(test_image(4));
  const auto x_c = codec::decompress(codec::compress(x, codec::QualityFactor(10)));
  const auto r = residual(x, x_c);
  const auto lx = to_levels(x), lc = to_levels(x_c);
  size_t i = 0;
  for (int c = 0; c < 3; ++c)
    for (int yy = 0; yy < 16; ++yy)
      for (int xx = 0; xx < 16; ++xx, ++i) {
        // Exact on integer levels; the [0,1] sum is only exact up to rounding.
        EXPECT_EQ(static_cast<int>(std::lround(r.planes[c](yy, xx) * 255.0)) + lc[i], lx[i]);
        EXPECT_NEAR(r.planes[c](yy, xx) + x_c.planes[c](yy, xx), x.planes[c](yy, xx), 1e-15);
      }
}

TEST(Pipeline, UndecodableStreamFallsBackToMidGray) {
  const auto x = test_image(5);
  const auto res = transmit_image(x, config(SemanticMode::adaptive, -6.0), &tiny_model(), desk_code(), 2);
  EXPECT_TRUE(res.corrupted);
  EXPECT_TRUE(res.x_c_hat == mid_gray(16, 16, 3));
  EXPECT_TRUE(res.x_hat.same_dims(x));
  bool any_failed = false;
  for (const auto& s : res.frame.segments) any_failed = any_failed || !s.converged;
  EXPECT_TRUE(any_failed);
}

TEST(Pipeline, EqualizedNoiseMatchesSigma2) {
  ChannelConfig cfg;
  cfg.snr_db = 3.0;
  cfg.seed = 9;
  const auto n = equalized_noise(200000, cfg);
  EXPECT_NEAR(n.squaredNorm() / n.size(), snr_to_sigma2(3.0, 1.0) / 2, 0.01 * snr_to_sigma2(3.0, 1.0));
}

TEST(Pipeline, ContractErrors) {
  const auto x = test_image(6);
  EXPECT_THROW(transmit_image(x, config(SemanticMode::adaptive, 5.0), nullptr, desk_code(), 1), std::invalid_argument);
  const Image odd(24, 24, 3, 0.5);
  EXPECT_THROW(transmit_image(odd, config(SemanticMode::adaptive, 5.0), &tiny_model(), desk_code(), 1), DimensionError);
  EXPECT_NO_THROW(transmit_image(odd, config(SemanticMode::off, 5.0), nullptr, desk_code(), 1));
  EXPECT_EQ(parse_semantic_mode("analog"), SemanticMode::analog);
  EXPECT_THROW(parse_semantic_mode("digital"), std::invalid_argument);
  EXPECT_THROW(resolve_code("/nonexistent/base.txt"), fec::LdpcError);
}
