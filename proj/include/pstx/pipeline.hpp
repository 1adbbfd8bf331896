#pragma once

#include "pstx/channel.hpp"
#include "pstx/codec.hpp"
#include "pstx/ldpc.hpp"
#include "pstx/model.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace pstx {

/// How the semantic branch is used.
///  off      - conventional stream only (x_hat = decoded x_c)
///  analog   - s sent at full dimension without rate adaptation (stage 1)
///  adaptive - s~ sent through the rate-adaptive FC banks
enum class SemanticMode { off, analog, adaptive };

SemanticMode parse_semantic_mode(const std::string& name);
std::string semantic_mode_name(SemanticMode mode);

struct PipelineConfig {
  int q = 30;
  /// "desk" (n = 1024), "full" (n = 6144) or a path to a base-matrix file.
  std::string code = "desk";
  ChannelConfig channel;
  SemanticMode mode = SemanticMode::adaptive;
  double lambda1 = 0.1;
  double lambda2 = 0.1;
  int max_iter = fec::kDefaultMaxIter;

  void validate() const;
};

fec::BaseMatrix resolve_code(const std::string& code);

/// Per-LDPC-frame entry of the image-stream segment table.
struct FrameSegment {
  int info_bits = 0;   // source bits carried
  int pad_bits = 0;    // shortened (untransmitted) zero info bits
  int sent_bits = 0;   // n_c - pad_bits
  bool converged = false;
  int iterations = 0;
};

struct TransmissionFrame {
  std::vector<FrameSegment> segments;
  long long codec_bits = 0;        // bitstream length
  long long m = 0;                 // image-stream complex symbols
  long long semantic_reals = 0;    // sum alpha_bar (adaptive) or dim(s) (analog)
  long long semantic_symbols = 0;  // ceil(semantic_reals / 2)
  long long side_bits = 0;         // alpha_bar side information
  long long side_symbols = 0;      // ceil(side_bits / 2)
  long long k = 0;                 // H * W * C
  std::vector<int> alpha_bar;

  long long n() const { return m + semantic_symbols + side_symbols; }
  double cbr() const { return static_cast<double>(n()) / static_cast<double>(k); }
};

struct TransmitResult {
  Image x_hat;
  Image x_c_hat;  // receiver-side conventional reconstruction
  Image x_c;      // transmitter-side decompress(compress(x))
  TransmissionFrame frame;
  bool corrupted = false;
  int clamped_patches = 0;
};

/// Channel seeds of the two streams derived from one trial seed.
std::uint64_t image_stream_seed(std::uint64_t seed);
std::uint64_t semantic_stream_seed(std::uint64_t seed);

/// Receiver-side additive disturbance of a ZF-equalized analog stream:
/// (h* n) / max(|h|^2, 1e-6) per complex symbol, returned as `reals` reals.
Eigen::VectorXd equalized_noise(long long reals, const ChannelConfig& cfg);

/// Residual x - x_c computed on integer levels (exact).
Image residual(const Image& x, const Image& x_c);

/// Mid-gray substitute used when the conventional stream fails.
Image mid_gray(int height, int width, int channels);

struct ConventionalResult {
  Image x_c;      // transmitter side
  Image x_c_hat;  // receiver side (mid-gray when undecodable)
  bool failed = false;
};

/// Image stream only: compress, LDPC, QPSK, channel, decode, decompress.
/// Fills the image-stream fields of `frame`.
ConventionalResult transmit_conventional(const Image& x, const PipelineConfig& cfg, const fec::ParityCheckMatrix& h,
                                         std::uint64_t seed, TransmissionFrame& frame);

/// Runs both streams end to end. `model` may be null only for mode off.
TransmitResult transmit_image(const Image& x, const PipelineConfig& cfg, const SemanticModel* model,
                              const fec::ParityCheckMatrix& h, std::uint64_t seed);

}  // namespace pstx
