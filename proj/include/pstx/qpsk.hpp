#pragma once

#include <complex>
#include <cstdint>
#include <span>
#include <vector>

namespace pstx::fec {

using Complex = std::complex<double>;
using Symbols = std::vector<Complex>;

/// Gray QPSK: (b0, b1) -> ((1 - 2 b0) + i (1 - 2 b1)) / sqrt(2). An odd bit
/// count is padded with one zero bit.
Symbols qpsk_modulate(std::span<const std::uint8_t> bits);

/// Coherent soft demodulation, two LLRs per symbol (LLR > 0 means bit 0).
/// Zero gain yields erasures (LLR 0). Values saturate at +-30.
std::vector<double> qpsk_soft_demod(std::span<const Complex> y, std::span<const Complex> h, double sigma2);

}  // namespace pstx::fec
