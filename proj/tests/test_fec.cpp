#include "oracles.hpp"

#include "pstx/channel.hpp"
#include "pstx/ldpc.hpp"
#include "pstx/qpsk.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace pstx;
using namespace pstx::fec;

namespace {

const ParityCheckMatrix& desk() {
  static const ParityCheckMatrix h = build_qc_ldpc(desk_base_matrix());
  return h;
}

Bits random_bits(int n, CounterRng& rng) {
  Bits b(n);
  for (auto& v : b) v = static_cast<std::uint8_t>(rng.below(2));
  return b;
}

std::vector<double> clean_llr(const Bits& cw, double mag = 8.0) {
  std::vector<double> llr(cw.size());
  for (size_t i = 0; i < cw.size(); ++i) llr[i] = cw[i] ? -mag : mag;
  return llr;
}

}  // namespace

TEST(BaseMatrix, ParsesAndReportsLineNumbers) {
  const auto b = parse_base_matrix("# demo\nlift 4\nrows 1\ncols 2\n0 -1\n");
  EXPECT_EQ(b.lift, 4);
  EXPECT_EQ(b.at(0, 1), -1);
  EXPECT_EQ(parse_base_matrix(format_base_matrix(b)).shifts, b.shifts);
  try {
    parse_base_matrix("lift 4\nrows 1\ncols 2\n0 4\n");
    FAIL();
  } catch (const LdpcError& e) {
    EXPECT_NE(std::string(e.what()).find("line 4"), std::string::npos) << e.what();
  }
  EXPECT_THROW(parse_base_matrix("lift 4\nrows 2\ncols 2\n0 0\n"), LdpcError);
  EXPECT_THROW(parse_base_matrix("0 0\n"), LdpcError);
}

TEST(Ldpc, IdentityLift) {
  const auto h = build_qc_ldpc(parse_base_matrix("lift 4\nrows 1\ncols 1\n0\n"));
  EXPECT_EQ(h.rows(), 4);
  EXPECT_EQ(h.cols(), 4);
  for (int r = 0; r < 4; ++r) {
    ASSERT_EQ(h.check_edge_end(r) - h.check_edge_begin(r), 1);
    EXPECT_EQ(h.edge_var(h.check_edge_begin(r)), r);
  }
}

TEST(Ldpc, RankDeficientIsRejected) {
  EXPECT_THROW(build_qc_ldpc(parse_base_matrix("lift 2\nrows 2\ncols 3\n0 0 0\n0 0 0\n")), LdpcError);
}

TEST(Ldpc, ShippedDimensions) {
  EXPECT_EQ(desk().rows(), 256);
  EXPECT_EQ(desk().cols(), 1024);
  EXPECT_EQ(desk().info_bits(), 768);
  EXPECT_DOUBLE_EQ(desk().rate(), 0.75);
  EXPECT_TRUE(desk().structured_encoder());
  const auto full = build_qc_ldpc(full_base_matrix());
  EXPECT_EQ(full.rows(), 1536);
  EXPECT_EQ(full.cols(), 6144);
}

TEST(Ldpc, ExpansionMatchesDenseOracle) {
  const auto base = desk_base_matrix();
  const auto dense = oracle::dense_parity_check(base);
  EXPECT_EQ(gf2_rank(dense), 256);
  CounterRng rng(3);
  for (int t = 0; t < 20; ++t) {
    const auto cw = ldpc_encode(desk(), random_bits(768, rng));
    EXPECT_EQ(oracle::dense_syndrome_weight(dense, cw), 0);
  }
}

TEST(Ldpc, LinearityAndZeroWord) {
  const Bits zero = ldpc_encode(desk(), Bits(768, 0));
  EXPECT_EQ(std::count(zero.begin(), zero.end(), 1), 0);
  CounterRng rng(4);
  const auto a = ldpc_encode(desk(), random_bits(768, rng)), b = ldpc_encode(desk(), random_bits(768, rng));
  Bits s(a.size());
  for (size_t i = 0; i < s.size(); ++i) s[i] = a[i] ^ b[i];
  EXPECT_TRUE(desk().is_codeword(s));
  EXPECT_THROW(ldpc_encode(desk(), Bits(10, 0)), LdpcError);
}

TEST(Ldpc, DenseFallbackEncoderAgreesOnSyndrome) {
  // Random full-rank base without the dual-diagonal structure.
  const auto base = parse_base_matrix("lift 8\nrows 2\ncols 4\n0 3 1 -1\n5 -1 2 0\n");
  const auto h = build_qc_ldpc(base);
  EXPECT_FALSE(h.structured_encoder());
  CounterRng rng(6);
  for (int t = 0; t < 50; ++t) EXPECT_TRUE(h.is_codeword(ldpc_encode(h, random_bits(h.info_bits(), rng))));
}

TEST(LdpcDecode, CleanInputConvergesAtIterationZero) {
  CounterRng rng(7);
  const auto cw = ldpc_encode(desk(), random_bits(768, rng));
  const auto res = ldpc_decode_bp(desk(), clean_llr(cw));
  EXPECT_TRUE(res.converged);
  EXPECT_EQ(res.iterations, 0);
  EXPECT_EQ(res.bits, cw);
}

TEST(LdpcDecode, MaxIterZeroReturnsHardDecisions) {
  std::vector<double> llr(1024);
  CounterRng rng(8);
  for (auto& v : llr) v = rng.normal();
  const auto res = ldpc_decode_bp(desk(), llr, 0);
  for (size_t i = 0; i < llr.size(); ++i) EXPECT_EQ(res.bits[i], llr[i] < 0 ? 1 : 0);
}

TEST(LdpcDecode, CorrectsSingleFlips) {
  CounterRng rng(9);
  for (int t = 0; t < 25; ++t) {
    const auto cw = ldpc_encode(desk(), random_bits(768, rng));
    auto llr = clean_llr(cw);
    llr[rng.below(1024)] *= -1;
    const auto res = ldpc_decode_bp(desk(), llr);
    EXPECT_TRUE(res.converged);
    EXPECT_EQ(res.bits, cw);
  }
}

TEST(LdpcDecode, LengthMismatchThrows) { EXPECT_THROW(ldpc_decode_bp(desk(), std::vector<double>(5)), LdpcError); }

TEST(Qpsk, MappingAndPower) {
  const Bits bits{0, 0, 1, 1, 0, 1, 1};
  const auto s = qpsk_modulate(bits);
  ASSERT_EQ(s.size(), 4u);
  const double a = 1 / std::sqrt(2.0);
  EXPECT_NEAR(std::abs(s[0] - Complex(a, a)), 0, 1e-15);
  EXPECT_NEAR(std::abs(s[1] - Complex(-a, -a)), 0, 1e-15);
  EXPECT_NEAR(std::abs(s[3] - Complex(-a, a)), 0, 1e-15);  // padded with a zero bit
  for (const auto& v : s) EXPECT_NEAR(std::norm(v), 1.0, 1e-15);
}

TEST(Qpsk, SoftDemodFormulaAndErasure) {
  const double a = 1 / std::sqrt(2.0);
  const std::vector<Complex> y{Complex(a, a)}, h{Complex(1, 0)};
  const auto llr = qpsk_soft_demod(y, h, 1.0);
  EXPECT_NEAR(llr[0], 2.0, 1e-12);
  EXPECT_NEAR(llr[1], 2.0, 1e-12);
  const auto er = qpsk_soft_demod(y, std::vector<Complex>{Complex(0, 0)}, 1.0);
  EXPECT_EQ(er[0], 0.0);
  EXPECT_EQ(er[1], 0.0);
  const auto sat = qpsk_soft_demod(y, h, 1e-6);
  EXPECT_EQ(sat[0], kLlrClip);
  EXPECT_THROW(qpsk_soft_demod(y, h, 0.0), std::invalid_argument);
}

TEST(Qpsk, NoiselessRoundTripWithFading) {
  CounterRng rng(10);
  const auto bits = random_bits(64, rng);
  const auto sym = qpsk_modulate(bits);
  std::vector<Complex> h(sym.size()), y(sym.size());
  for (size_t i = 0; i < sym.size(); ++i) {
    h[i] = Complex(rng.normal(), rng.normal());
    y[i] = h[i] * sym[i];
  }
  const auto llr = qpsk_soft_demod(y, h, 1e-9);
  for (size_t i = 0; i < bits.size(); ++i) EXPECT_EQ(llr[i] < 0 ? 1 : 0, bits[i]);
}
