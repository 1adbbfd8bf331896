#pragma once

#include "pstx/pipeline.hpp"

#include <functional>
#include <vector>

namespace pstx {

/// Optional perceptual term L_perc(x, x_hat); disabled when empty.
using PerceptualHook = std::function<Tensor(const Tensor& x, const Tensor& x_hat)>;

/// Squared error is measured on the 8-bit scale, matching psnr().
constexpr double kPixelScale2 = 255.0 * 255.0;

/// MSE(x, x_hat) + lambda1 * bits / numel(x) + lambda2 * L_perc, with x in
/// [0,1] and the MSE taken on the 8-bit scale (times 255^2). The rate is
/// expressed per source dimension so that lambda1 does not depend on image
/// size or batch size. Empty likelihoods drop the rate term.
Tensor rd_loss(const Tensor& x, const Tensor& x_hat, const Tensor& likelihood_s, const Tensor& likelihood_r,
               double lambda1, double lambda2 = 0.0, const PerceptualHook& perceptual = {});

struct TrainConfig {
  int stage = 1;
  int steps = 200;
  int batch = 4;
  double lr = 5e-4;
  /// Poly decay power used in stage 3.
  double poly_power = 0.9;
  int q = 30;
  std::vector<double> snr_choices{2, 4, 6, 8, 10, 12};
  ChannelKind channel = ChannelKind::awgn;
  bool flips = true;
  /// Random square crop side (0 = full image); must be a multiple of 2^N.
  int crop = 0;
  double lambda1 = 0.1;
  double lambda2 = 0.1;
  PerceptualHook perceptual;
  std::uint64_t seed = 1;
  /// Simulate the image stream (LDPC/QPSK) so the decoder sees corrupted x_c.
  bool simulate_image_stream = true;
  /// Probability of replacing a sample's x_c_hat by the mid-gray failure
  /// substitute, so the decoder also learns to rely on s alone.
  double stream_dropout = 0.5;
  std::string code = "desk";

  void validate() const;
};

struct TrainLog {
  std::vector<double> loss;
  std::vector<double> mse;  // 8-bit scale
  std::vector<double> rate_bits;
  std::vector<double> grad_norm;  // global L2 norm before clipping
};

/// Differentiable forward pass of a batch through the semantic branch.
struct ForwardResult {
  Tensor x_hat;
  Tensor likelihood_s;  // empty in analog mode
  Tensor likelihood_r;
};

/// x, x_c_hat, x_r are [B,C,H,W]; mode analog or adaptive. Quantization noise
/// and channel noise are drawn from `rng`.
ForwardResult forward_train(const SemanticModel& model, const Tensor& x, const Tensor& x_c_hat, const Tensor& x_r,
                            SemanticMode mode, ChannelKind channel, double snr_db, CounterRng& rng);

class StageError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Runs one training stage. Requires model.stage == cfg.stage - 1 and sets
/// model.stage = cfg.stage on return.
///  1: everything except the RA codec, s sent analog at full dimension, MSE.
///  2: RA codec only (h_s, prior, tokens, FC banks); other weights frozen.
///  3: all parameters, poly learning-rate decay.
TrainLog train(SemanticModel& model, const TrainConfig& cfg, const std::vector<Image>& data,
               const std::function<void(int step, const TrainLog& log)>& on_step = {});

}  // namespace pstx
