#include "pstx/channel.hpp"

#include "pstx/rng.hpp"

#include <cmath>
#include <stdexcept>

namespace pstx {

namespace {
constexpr std::uint64_t kGainStream = 1;
constexpr std::uint64_t kNoiseStream = 2;
}  // namespace

ChannelKind parse_channel_kind(const std::string& name) {
  if (name == "awgn") return ChannelKind::awgn;
  if (name == "rayleigh" || name == "rayleigh_block") return ChannelKind::rayleigh_block;
  throw std::invalid_argument("unknown channel kind '" + name + "' (expected awgn or rayleigh)");
}

std::string channel_kind_name(ChannelKind kind) { return kind == ChannelKind::awgn ? "awgn" : "rayleigh"; }

void ChannelConfig::validate() const {
  if (!(power > 0)) throw std::invalid_argument("channel power must be positive");
  if (block_len < 1) throw std::invalid_argument("channel block_len must be >= 1");
  if (!std::isfinite(snr_db)) throw std::invalid_argument("channel snr_db must be finite");
}

ComplexSymbols normalize_power(std::span<const Complex> z, double power) {
  ComplexSymbols out(z.begin(), z.end());
  double energy = 0;
  for (const auto& v : z) energy += std::norm(v);
  if (energy == 0) return out;
  const double s = std::sqrt(power * static_cast<double>(z.size()) / energy);
  for (auto& v : out) v *= s;
  return out;
}

double snr_to_sigma2(double snr_db, double power) {
  if (!(power > 0)) throw std::invalid_argument("snr_to_sigma2: power must be positive");
  return power * std::pow(10.0, -snr_db / 10.0);
}

ChannelOutput transmit(std::span<const Complex> z, const ChannelConfig& cfg) {
  cfg.validate();
  ChannelOutput out;
  auto& rz = out.realization;
  rz.sigma2 = snr_to_sigma2(cfg.snr_db, cfg.power);
  const size_t n = z.size();
  rz.h.assign(n, Complex(1.0, 0.0));
  if (cfg.kind == ChannelKind::rayleigh_block) {
    CounterRng gains(cfg.seed, kGainStream);
    const double a = std::sqrt(0.5);
    for (size_t start = 0; start < n; start += cfg.block_len) {
      const double re = a * gains.normal();
      const double im = a * gains.normal();
      for (size_t i = start; i < std::min(n, start + cfg.block_len); ++i) rz.h[i] = Complex(re, im);
    }
  }
  CounterRng noise(cfg.seed, kNoiseStream);
  const double sd = std::sqrt(rz.sigma2 / 2.0);
  rz.n.resize(n);
  out.y.resize(n);
  for (size_t i = 0; i < n; ++i) {
    const double re = sd * noise.normal();
    const double im = sd * noise.normal();
    rz.n[i] = Complex(re, im);
    out.y[i] = rz.h[i] * z[i] + rz.n[i];
  }
  return out;
}

}  // namespace pstx
