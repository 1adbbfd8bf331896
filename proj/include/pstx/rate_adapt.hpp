#pragma once

#include "pstx/channel.hpp"
#include "pstx/layers.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace pstx {

/// Strictly increasing set of allowed per-patch output dimensions.
struct RateSet {
  std::vector<int> widths;

  /// {4, 8, ..., 128}.
  static RateSet standard();
  void validate() const;
  int size() const { return static_cast<int>(widths.size()); }
  int max() const { return widths.back(); }
  /// Position of `w` in the set; throws if absent.
  int index_of(int w) const;
  /// Bits per patch of the side information: ceil(log2 M).
  int side_bits() const;
};

enum class QuantMode { train, test };

/// Round half away from zero.
double round_half_away(double v);

/// train: t + U(-1/2, 1/2) per element. test: rounded values with an
/// identity (straight-through) gradient.
Tensor quantize(const Tensor& t, QuantMode mode, CounterRng& rng);

struct EntropyParams {
  Tensor mu;
  Tensor sigma;
};

/// h_s: conv, LeakyReLU, conv; output split into mu and softplus(raw) + 1e-6.
struct HyperSynthesis {
  static constexpr double kSigmaFloor = 1e-6;
  Conv2d c1, c2;
  int latent_channels = 0;

  HyperSynthesis() = default;
  HyperSynthesis(int hyper_channels, int latent_channels, CounterRng& rng);
  EntropyParams operator()(const Tensor& r_tilde) const;
  void collect(ParamList& out, const std::string& prefix) const;
};

/// Per-element probability of the integer bin around s under N(mu, sigma^2).
Tensor likelihood(const Tensor& s_tilde, const EntropyParams& m);

/// Per-channel learned CDF (monotone composition 1 -> 3 -> 3 -> 1) used as
/// the prior of the hyper-latent r~.
struct FactorizedPrior {
  static constexpr double kFloor = 1e-12;
  int channels = 0;
  std::vector<Tensor> matrices;  // [C, out, in], passed through softplus
  std::vector<Tensor> biases;    // [C, out]
  std::vector<Tensor> factors;   // [C, out], passed through tanh

  FactorizedPrior() = default;
  FactorizedPrior(int channels, CounterRng& rng);
  /// Logit of the CDF evaluated at values laid out as [C, 1, n].
  Tensor cdf_logit(const Tensor& x) const;
  /// Bin probabilities for r~ [B,C,H,W], floored at 1e-12.
  Tensor likelihood(const Tensor& r_tilde) const;
  void collect(ParamList& out, const std::string& prefix) const;
};

struct RateAllocation {
  std::vector<double> alpha;    // per patch
  std::vector<int> alpha_bar;   // per patch, in W
  int clamped = 0;              // patches with alpha > max(W)
  int height = 0, width = 0;    // patch grid

  int patches() const { return static_cast<int>(alpha_bar.size()); }
  long long total() const;
  /// ceil(total / 2): complex symbols carrying the semantic payload.
  long long symbols() const { return (total() + 1) / 2; }
};

/// Smallest w in W with w >= a, or max(W) when a exceeds it.
int ceil_rate(double a, const RateSet& w, bool* clamped = nullptr);

/// Allocation for batch item `index` of the likelihood tensor [B,C,H,W];
/// patch i is spatial position i (row-major), alpha_i = -rho sum_c log2 p.
RateAllocation allocate_rates(const Tensor& likelihood_s, int index, double rho, const RateSet& w);

/// Rate tokens plus the forward (C -> w) and inverse (w -> C) FC banks.
struct RateCodec {
  RateSet rates;
  int dim = 0;
  Tensor tokens;  // [M, dim]
  std::vector<Linear> encoders;
  std::vector<Linear> decoders;

  RateCodec() = default;
  RateCodec(RateSet rates, int dim, CounterRng& rng);

  /// s [1,C,H,W] -> [1, sum(alpha_bar)] real channel inputs.
  Tensor encode(const Tensor& s, const RateAllocation& a) const;
  /// [1, sum(alpha_bar)] -> [1,C,H,W].
  Tensor decode(const Tensor& received, const RateAllocation& a) const;
  void collect(ParamList& out, const std::string& prefix) const;
};

/// Pairs consecutive reals into complex symbols, zero-padding an odd tail.
ComplexSymbols pair_reals(std::span<const double> reals);
/// Inverse of pair_reals; `count` reals are kept. Throws if the symbol count
/// is not ceil(count / 2).
std::vector<double> unpair_reals(std::span<const Complex> symbols, long long count);

ComplexSymbols ra_encode(const Tensor& s, const RateAllocation& a, const RateCodec& codec);
Tensor ra_decode(std::span<const Complex> symbols, const RateAllocation& a, const RateCodec& codec);

/// -sum log2 p_s - sum log2 p_r, in bits (scalar tensor).
Tensor rate_term(const Tensor& likelihood_s, const Tensor& likelihood_r);

struct CbrReport {
  double cbr = 0;          // (ceil(sum alpha_bar / 2) + m) / k
  double cbr_literal = 0;  // (sum alpha_bar + m) / k
};
CbrReport cbr(const RateAllocation& a, long long m, long long k);

/// Side information: one index into W per patch, side_bits() each, MSB first.
std::vector<std::uint8_t> pack_rates(const RateAllocation& a, const RateSet& w);
std::vector<int> unpack_rates(std::span<const std::uint8_t> bits, int patches, const RateSet& w);

}  // namespace pstx
