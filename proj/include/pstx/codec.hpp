#pragma once

#include "pstx/image.hpp"

#include <array>
#include <cstdint>
#include <stdexcept>
#include <vector>

namespace pstx::codec {

/// Quality factor q in [1,100]; larger q keeps more detail.
class QualityFactor {
 public:
  explicit QualityFactor(int q);
  int value() const { return q_; }

 private:
  int q_;
};

class CodecError : public std::runtime_error {
 public:
  CodecError(const std::string& what, std::size_t byte_offset);
  std::size_t byte_offset() const { return offset_; }

 private:
  std::size_t offset_;
};

using Block = Eigen::Matrix<double, 8, 8, Eigen::RowMajor>;
using QuantTable = std::array<int, 64>;

inline constexpr std::array<std::uint8_t, 4> kMagic = {'P', 'S', 'T', 'C'};
inline constexpr std::uint8_t kVersion = 1;
inline constexpr std::size_t kHeaderBytes = 15;

/// Natural-order index of the k-th zigzag coefficient.
extern const std::array<int, 64> kZigzag;
extern const QuantTable kLuminanceBase;

/// Orthonormal type-II DCT basis: row u holds c(u) cos((2x+1) u pi / 16).
template <typename Scalar = double>
Eigen::Matrix<Scalar, 8, 8, Eigen::RowMajor> dct_basis();

template <typename Scalar>
Eigen::Matrix<Scalar, 8, 8, Eigen::RowMajor> dct2(const Eigen::Matrix<Scalar, 8, 8, Eigen::RowMajor>& block) {
  const auto d = dct_basis<Scalar>();
  return d * block * d.transpose();
}

template <typename Scalar>
Eigen::Matrix<Scalar, 8, 8, Eigen::RowMajor> idct2(const Eigen::Matrix<Scalar, 8, 8, Eigen::RowMajor>& coeffs) {
  const auto d = dct_basis<Scalar>();
  return d.transpose() * coeffs * d;
}

/// scale = 5000/q (q < 50) or 200 - 2q; entry = clamp(round(base * scale / 100), 1, 255).
QuantTable quant_table(QualityFactor q);

struct Header {
  int height = 0;
  int width = 0;
  int channels = 0;
  int quality = 0;
  std::uint32_t payload_bits = 0;
};

/// Serialized container: 15-byte big-endian header followed by the
/// prefix-coded payload (see docs/formats.md).
struct Bitstream {
  std::vector<std::uint8_t> bytes;

  std::size_t size_bits() const { return bytes.size() * 8; }
};

Header parse_header(const std::vector<std::uint8_t>& bytes);

/// Deterministic block-DCT compression of an image (pixels snapped to 8-bit
/// levels). Dimensions that are not multiples of 8 are edge-padded internally.
Bitstream compress(const Image& x, QualityFactor q);

/// Inverse of compress. Throws CodecError (with byte offset) on any
/// malformed, truncated or trailing data.
Image decompress(const Bitstream& b);

}  // namespace pstx::codec
