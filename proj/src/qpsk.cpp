#include "pstx/qpsk.hpp"

#include "pstx/ldpc.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace pstx::fec {

Symbols qpsk_modulate(std::span<const std::uint8_t> bits) {
  const double a = 1.0 / std::sqrt(2.0);
  Symbols out((bits.size() + 1) / 2);
  for (size_t s = 0; s < out.size(); ++s) {
    const int b0 = bits[2 * s] & 1;
    const int b1 = 2 * s + 1 < bits.size() ? bits[2 * s + 1] & 1 : 0;
    out[s] = Complex((1 - 2 * b0) * a, (1 - 2 * b1) * a);
  }
  return out;
}

std::vector<double> qpsk_soft_demod(std::span<const Complex> y, std::span<const Complex> h, double sigma2) {
  if (!(sigma2 > 0)) throw std::invalid_argument("qpsk_soft_demod: sigma2 must be positive");
  if (y.size() != h.size()) throw std::invalid_argument("qpsk_soft_demod: y and h lengths differ");
  const double k = 2.0 * std::sqrt(2.0) / sigma2;
  std::vector<double> llr(2 * y.size());
  for (size_t s = 0; s < y.size(); ++s) {
    const double g = std::norm(h[s]);
    if (g == 0) {
      llr[2 * s] = llr[2 * s + 1] = 0;
      continue;
    }
    // (h* y / |h|^2) * |h|^2 == h* y.
    const Complex eq = std::conj(h[s]) * y[s];
    llr[2 * s] = std::clamp(k * eq.real(), -kLlrClip, kLlrClip);
    llr[2 * s + 1] = std::clamp(k * eq.imag(), -kLlrClip, kLlrClip);
  }
  return llr;
}

}  // namespace pstx::fec
