#pragma once

#include "pstx/rate_adapt.hpp"
#include "pstx/sem_decoder.hpp"
#include "pstx/sem_encoder.hpp"

#include <cstdint>
#include <stdexcept>
#include <string>

namespace pstx {

struct ModelConfig {
  int image_channels = 3;
  /// REM output widths; the last entry is C_s (= C_r).
  std::vector<int> encoder_widths{16, 32, 64, 32};
  DecoderConfig decoder;
  RateSet rates = RateSet::standard();
  double rho = 0.2;

  int latent_channels() const { return encoder_widths.back(); }
  int levels() const { return static_cast<int>(encoder_widths.size()); }
  /// Spatial reduction factor 2^N of the encoder.
  int reduction() const { return 1 << levels(); }
  void validate() const;
};

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Every learned part of the semantic branch plus a training-stage marker
/// (0 = untrained, s = stage s completed). Copies share parameter storage.
struct SemanticModel {
  ModelConfig config;
  SemanticEncoder encoder;
  SemanticDecoder decoder;
  HyperSynthesis hyper;
  FactorizedPrior prior;
  RateCodec ra;
  int stage = 0;

  explicit SemanticModel(ModelConfig cfg = {}, std::uint64_t seed = 0);

  ParamList params() const;
  /// Rate-adaptation parameters: h_s, the prior, rate tokens and FC banks.
  ParamList ra_params() const;
  ParamList non_ra_params() const;
  long long parameter_count() const;

  void save(const std::string& path) const;
  static SemanticModel load(const std::string& path);
};

}  // namespace pstx
