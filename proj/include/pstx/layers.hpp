#pragma once

#include "pstx/ops.hpp"
#include "pstx/rng.hpp"

#include <string>
#include <vector>

namespace pstx {

struct NamedParam {
  std::string name;
  Tensor tensor;
};
using ParamList = std::vector<NamedParam>;

/// Glorot-uniform tensor: U(-a, a), a = sqrt(6 / (fan_in + fan_out)).
Tensor glorot_uniform(Shape shape, int fan_in, int fan_out, CounterRng& rng);

struct Conv2d {
  Tensor weight;  // [C_out, C_in, k, k]
  Tensor bias;    // [C_out]
  int stride = 1;
  int padding = 0;

  Conv2d() = default;
  /// Padding defaults to k/2 ("same" for stride 1).
  Conv2d(int in_channels, int out_channels, int kernel, int stride, CounterRng& rng);

  Tensor operator()(const Tensor& x) const { return conv2d(x, weight, bias, stride, padding); }
  void collect(ParamList& out, const std::string& prefix) const;
};

struct ConvTranspose2d {
  Tensor weight;  // [C_in, C_out, k, k]
  Tensor bias;    // [C_out]
  int stride = 1;
  int padding = 0;

  ConvTranspose2d() = default;
  ConvTranspose2d(int in_channels, int out_channels, int kernel, int stride, int padding, CounterRng& rng);

  Tensor operator()(const Tensor& x) const { return conv_transpose2d(x, weight, bias, stride, padding); }
  void collect(ParamList& out, const std::string& prefix) const;
};

struct Linear {
  Tensor weight;  // [out, in]
  Tensor bias;    // [out]

  Linear() = default;
  Linear(int in_features, int out_features, CounterRng& rng);

  Tensor operator()(const Tensor& x) const { return linear(x, weight, bias); }
  void collect(ParamList& out, const std::string& prefix) const;
};

/// GDN / IGDN layer. Effective parameters are reparameterized as
/// beta = beta_raw^2 + 1e-6 and gamma = gamma_raw^2 + 1e-6, so beta > 0 and
/// gamma >= 0 hold for any raw values.
struct Gdn {
  static constexpr double kFloor = 1e-6;

  Tensor beta_raw;   // [C]
  Tensor gamma_raw;  // [C, C]
  bool inverse = false;

  Gdn() = default;
  /// beta = 1, gamma = 0.1 I (off-diagonals at the floor plus a small seed).
  Gdn(int channels, bool inverse);

  Tensor beta() const;
  Tensor gamma() const;
  Tensor operator()(const Tensor& x) const { return gdn(x, beta(), gamma(), inverse); }
  void collect(ParamList& out, const std::string& prefix) const;
};

struct PRelu {
  Tensor slope;  // [C], initialized to 0.25

  PRelu() = default;
  explicit PRelu(int channels);

  Tensor operator()(const Tensor& x) const { return prelu(x, slope); }
  void collect(ParamList& out, const std::string& prefix) const;
};

/// Exact inverse of forward GDN by fixed-point iteration
/// x <- y * sqrt(beta + gamma x^2), started from x = y. The first iterate is
/// the IGDN layer output. Not differentiable; converges when the map is a
/// contraction (bounded inputs).
Tensor gdn_invert(const Tensor& y, const Tensor& beta, const Tensor& gamma, int max_iter = 100000,
                  double tol = 1e-14);

constexpr double kLeakySlope = 0.01;

}  // namespace pstx
