#include "pstx/channel.hpp"
#include "pstx/rng.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <cstring>

using namespace pstx;

TEST(Channel, NormalizePower) {
  const ComplexSymbols z{{2, 0}, {0, 2}};
  const auto n = normalize_power(z, 1.0);
  EXPECT_NEAR(n[0].real(), 1.0, 1e-15);
  EXPECT_NEAR(n[1].imag(), 1.0, 1e-15);
  const auto fixed = normalize_power(n, 1.0);
  EXPECT_NEAR(std::abs(fixed[0] - n[0]), 0.0, 1e-12);
  const ComplexSymbols zero(3);
  EXPECT_EQ(normalize_power(zero, 1.0), zero);
}

TEST(Channel, SnrToSigma2) {
  EXPECT_DOUBLE_EQ(snr_to_sigma2(0, 1), 1.0);
  EXPECT_NEAR(snr_to_sigma2(10, 1), 0.1, 1e-15);
  EXPECT_NEAR(snr_to_sigma2(3, 2), 2 * std::pow(10.0, -0.3), 1e-15);
  EXPECT_THROW(snr_to_sigma2(3, 0), std::invalid_argument);
}

TEST(Channel, ConfigValidation) {
  ChannelConfig c;
  c.block_len = 0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  EXPECT_EQ(parse_channel_kind("rayleigh"), ChannelKind::rayleigh_block);
  EXPECT_THROW(parse_channel_kind("rician"), std::invalid_argument);
}

TEST(Channel, NoiselessAwgnIsIdentity) {
  ChannelConfig c;
  c.snr_db = 400;
  const ComplexSymbols z{{0.3, -0.2}, {1, 1}};
  const auto out = transmit(z, c);
  for (size_t i = 0; i < z.size(); ++i) EXPECT_NEAR(std::abs(out.y[i] - z[i]), 0, 1e-15);
  for (const auto& h : out.realization.h) EXPECT_EQ(h, Complex(1, 0));
}

TEST(Channel, RayleighSingleBlockIsConstant) {
  ChannelConfig c;
  c.kind = ChannelKind::rayleigh_block;
  c.block_len = 16;
  const auto out = transmit(ComplexSymbols(16, {1, 0}), c);
  for (const auto& h : out.realization.h) EXPECT_EQ(h, out.realization.h[0]);
  c.block_len = 4;
  const auto multi = transmit(ComplexSymbols(16, {1, 0}), c);
  EXPECT_EQ(multi.realization.h[0], multi.realization.h[3]);
  EXPECT_NE(multi.realization.h[0], multi.realization.h[4]);
}

TEST(Channel, SameSeedSameBytes) {
  ChannelConfig c;
  c.kind = ChannelKind::rayleigh_block;
  c.block_len = 3;
  c.seed = 99;
  const ComplexSymbols z(50, {0.5, -0.5});
  const auto a = transmit(z, c), b = transmit(z, c);
  EXPECT_EQ(std::memcmp(a.y.data(), b.y.data(), a.y.size() * sizeof(Complex)), 0);
  c.seed = 100;
  EXPECT_NE(transmit(z, c).y, a.y);
  EXPECT_EQ(a.y.size(), z.size());
}

TEST(Rng, DeriveSeedSeparatesStreams) {
  EXPECT_NE(derive_seed(1, 0), derive_seed(1, 1));
  EXPECT_NE(derive_seed(1, 0), derive_seed(2, 0));
  EXPECT_EQ(derive_seed(5, 3, 2), derive_seed(5, 3, 2));
}
