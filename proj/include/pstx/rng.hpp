#pragma once

#include <array>
#include <cstdint>
#include <limits>

namespace pstx {

/// Philox4x32-10 counter-based generator (Salmon et al. constants).
///
/// Key = 64-bit seed split into two 32-bit words; counter words 0-1 hold the
/// block index and words 2-3 hold a 64-bit stream id. Each block yields two
/// 64-bit outputs (words 1:0 then 3:2, little-endian pairing). Uniform reals
/// use the top 53 bits; normals use Box-Muller on an open-interval uniform.
class CounterRng {
 public:
  using result_type = std::uint64_t;

  explicit CounterRng(std::uint64_t seed = 0, std::uint64_t stream = 0);

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }
  result_type operator()() { return next_u64(); }

  std::uint64_t next_u64();
  /// [0, 1)
  double uniform();
  /// (0, 1)
  double uniform_open();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  double normal();
  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n);

  static std::array<std::uint32_t, 4> block(std::array<std::uint32_t, 4> counter,
                                            std::array<std::uint32_t, 2> key);

 private:
  std::array<std::uint32_t, 2> key_;
  std::uint64_t stream_;
  std::uint64_t index_ = 0;
  std::array<std::uint32_t, 4> buffer_{};
  int buffered_ = 0;
  double spare_normal_ = 0;
  bool has_spare_ = false;
};

/// SplitMix64 finalizer combination used to derive per-trial/per-stream seeds.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0);

}  // namespace pstx
