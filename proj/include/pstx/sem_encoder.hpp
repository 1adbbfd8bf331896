#pragma once

#include "pstx/layers.hpp"

#include <vector>

namespace pstx {

/// Two-conv down-sampler: stride-2 conv then stride-1 conv, LeakyReLU after each.
struct DownPair {
  Conv2d first;
  Conv2d second;

  DownPair() = default;
  DownPair(int in_channels, int out_channels, CounterRng& rng);
  Tensor operator()(const Tensor& x) const;
  void collect(ParamList& out, const std::string& prefix) const;
};

/// Residual-enhanced module. The image path is gated by an attention map
/// computed from the residual path.
struct Rem {
  DownPair down_y;
  DownPair down_r;
  Conv2d attention;  // 3x3, followed by sigmoid
  Conv2d mix;        // 1x1 over concat(r_hat, y_next); unused when `last`
  bool last = false;

  Rem() = default;
  Rem(int in_channels, int out_channels, bool last, CounterRng& rng);

  struct Output {
    Tensor y;
    Tensor r;
    Tensor attention_map;
  };
  Output operator()(const Tensor& y, const Tensor& r) const;
  void collect(ParamList& out, const std::string& prefix) const;
};

struct EncoderOutput {
  Tensor s;  // [B, C_s, H/2^N, W/2^N]
  Tensor r;  // [B, C_r, H/2^N, W/2^N]
};

struct SemanticEncoder {
  std::vector<Rem> rems;

  SemanticEncoder() = default;
  /// `widths` lists the output channels of each REM; the last entry is C_s.
  SemanticEncoder(int in_channels, const std::vector<int>& widths, CounterRng& rng);

  /// x and x_r are [B,C,H,W] with H, W divisible by 2^N.
  EncoderOutput operator()(const Tensor& x, const Tensor& x_r) const;
  void collect(ParamList& out, const std::string& prefix) const;
};

}  // namespace pstx
