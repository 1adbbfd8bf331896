#include "pstx/layers.hpp"

#include <cmath>

namespace pstx {

using Eigen::VectorXd;

Tensor glorot_uniform(Shape shape, int fan_in, int fan_out, CounterRng& rng) {
  const double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  VectorXd v(shape_numel(shape));
  for (auto& e : v) e = rng.uniform(-a, a);
  return Tensor::from(std::move(shape), std::move(v), true);
}

Conv2d::Conv2d(int in_channels, int out_channels, int kernel, int stride_, CounterRng& rng)
    : weight(glorot_uniform({out_channels, in_channels, kernel, kernel}, in_channels * kernel * kernel,
                            out_channels * kernel * kernel, rng)),
      bias(Tensor::zeros({out_channels}, true)),
      stride(stride_),
      padding(kernel / 2) {}

void Conv2d::collect(ParamList& out, const std::string& prefix) const {
  out.push_back({prefix + ".weight", weight});
  out.push_back({prefix + ".bias", bias});
}

ConvTranspose2d::ConvTranspose2d(int in_channels, int out_channels, int kernel, int stride_, int padding_,
                                 CounterRng& rng)
    : weight(glorot_uniform({in_channels, out_channels, kernel, kernel}, in_channels * kernel * kernel,
                            out_channels * kernel * kernel, rng)),
      bias(Tensor::zeros({out_channels}, true)),
      stride(stride_),
      padding(padding_) {}

void ConvTranspose2d::collect(ParamList& out, const std::string& prefix) const {
  out.push_back({prefix + ".weight", weight});
  out.push_back({prefix + ".bias", bias});
}

Linear::Linear(int in_features, int out_features, CounterRng& rng)
    : weight(glorot_uniform({out_features, in_features}, in_features, out_features, rng)),
      bias(Tensor::zeros({out_features}, true)) {}

void Linear::collect(ParamList& out, const std::string& prefix) const {
  out.push_back({prefix + ".weight", weight});
  out.push_back({prefix + ".bias", bias});
}

Gdn::Gdn(int channels, bool inverse_) : inverse(inverse_) {
  beta_raw = Tensor::full({channels}, std::sqrt(1.0 - kFloor), true);
  VectorXd g = VectorXd::Constant(static_cast<Eigen::Index>(channels) * channels, 1e-3);
  for (int i = 0; i < channels; ++i) g[static_cast<Eigen::Index>(i) * channels + i] = std::sqrt(0.1 - kFloor);
  gamma_raw = Tensor::from({channels, channels}, std::move(g), true);
}

Tensor Gdn::beta() const { return add_scalar(square(beta_raw), kFloor); }
Tensor Gdn::gamma() const { return add_scalar(square(gamma_raw), kFloor); }

void Gdn::collect(ParamList& out, const std::string& prefix) const {
  out.push_back({prefix + ".beta", beta_raw});
  out.push_back({prefix + ".gamma", gamma_raw});
}

PRelu::PRelu(int channels) : slope(Tensor::full({channels}, 0.25, true)) {}

void PRelu::collect(ParamList& out, const std::string& prefix) const { out.push_back({prefix + ".slope", slope}); }

Tensor gdn_invert(const Tensor& y, const Tensor& beta, const Tensor& gamma, int max_iter, double tol) {
  using MatRM = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  if (y.rank() != 4) throw DimensionError("gdn_invert: input must be [B,C,H,W]");
  const int batch = y.dim(0), c = y.dim(1);
  if (beta.numel() != c || gamma.numel() != static_cast<Eigen::Index>(c) * c) {
    throw DimensionError("gdn_invert: parameter sizes must match channel count (axis 1)");
  }
  const Eigen::Index plane = static_cast<Eigen::Index>(y.dim(2)) * y.dim(3);
  Eigen::Map<const MatRM> gm(gamma.value().data(), c, c);
  VectorXd out(y.numel());
  for (int b = 0; b < batch; ++b) {
    Eigen::Map<const MatRM> target(y.value().data() + b * c * plane, c, plane);
    MatRM x = target;
    for (int it = 0; it < max_iter; ++it) {
      MatRM norm = ((gm * x.cwiseAbs2()).colwise() + beta.value()).cwiseSqrt();
      MatRM next = target.cwiseProduct(norm);
      const double delta = (next - x).cwiseAbs().maxCoeff();
      x = std::move(next);
      if (delta < tol) break;
    }
    Eigen::Map<MatRM>(out.data() + b * c * plane, c, plane) = x;
  }
  return Tensor::from(y.shape(), std::move(out));
}

}  // namespace pstx
