#pragma once

#include <complex>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace pstx {

using Complex = std::complex<double>;
using ComplexSymbols = std::vector<Complex>;

enum class ChannelKind { awgn, rayleigh_block };

ChannelKind parse_channel_kind(const std::string& name);
std::string channel_kind_name(ChannelKind kind);

struct ChannelConfig {
  ChannelKind kind = ChannelKind::awgn;
  double snr_db = 10.0;
  double power = 1.0;
  int block_len = 1;
  std::uint64_t seed = 0;

  void validate() const;
};

struct ChannelRealization {
  ComplexSymbols h;
  ComplexSymbols n;
  double sigma2 = 0;
};

/// z * sqrt(P n / <z,z>); the zero vector is returned unchanged.
ComplexSymbols normalize_power(std::span<const Complex> z, double power);

double snr_to_sigma2(double snr_db, double power);

struct ChannelOutput {
  ComplexSymbols y;
  ChannelRealization realization;
};

/// y = h .* z + n, n ~ CN(0, sigma2 I). Gains and noise come from separate
/// counter streams keyed by cfg.seed, so results depend only on (z, cfg).
ChannelOutput transmit(std::span<const Complex> z, const ChannelConfig& cfg);

}  // namespace pstx
