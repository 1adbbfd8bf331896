#include "pstx/metrics.hpp"

#include <algorithm>
#include <array>
#include <cmath>

namespace pstx {

namespace {

constexpr std::array<double, 5> kScaleWeights{0.0448, 0.2856, 0.3001, 0.2363, 0.1333};
constexpr int kWindow = 11;
constexpr double kSigma = 1.5;

void require_same(const Image& a, const Image& b, const char* what) {
  if (!a.same_dims(b)) throw ImageError(std::string(what) + ": image dimensions differ");
  if (a.size() == 0) throw ImageError(std::string(what) + ": empty image");
}

Eigen::VectorXd gaussian_kernel() {
  Eigen::VectorXd g(kWindow);
  for (int i = 0; i < kWindow; ++i) {
    const double d = i - kWindow / 2;
    g[i] = std::exp(-d * d / (2 * kSigma * kSigma));
  }
  return g / g.sum();
}

// Separable "valid" Gaussian filter.
Plane filter(const Plane& p, const Eigen::VectorXd& g) {
  const int h = static_cast<int>(p.rows()), w = static_cast<int>(p.cols());
  Plane tmp(h, w - kWindow + 1);
  for (int j = 0; j < tmp.cols(); ++j) tmp.col(j) = p.middleCols(j, kWindow) * g;
  Plane out(h - kWindow + 1, tmp.cols());
  for (int i = 0; i < out.rows(); ++i) out.row(i) = g.transpose() * tmp.middleRows(i, kWindow);
  return out;
}

// Mean SSIM and mean contrast-structure term of one scale.
std::pair<double, double> ssim_terms(const Plane& x, const Plane& y, const Eigen::VectorXd& g) {
  const double c1 = std::pow(0.01 * 255, 2), c2 = std::pow(0.03 * 255, 2);
  const Plane mx = filter(x, g), my = filter(y, g);
  const Plane sxx = filter(x.cwiseProduct(x), g) - mx.cwiseProduct(mx);
  const Plane syy = filter(y.cwiseProduct(y), g) - my.cwiseProduct(my);
  const Plane sxy = filter(x.cwiseProduct(y), g) - mx.cwiseProduct(my);
  const Plane cs = (2 * sxy.array() + c2) / (sxx.array() + syy.array() + c2);
  const Plane lum = (2 * mx.cwiseProduct(my).array() + c1) / (mx.cwiseAbs2().array() + my.cwiseAbs2().array() + c1);
  return {lum.cwiseProduct(cs).mean(), cs.mean()};
}

Plane downsample(const Plane& p) {
  Plane out(p.rows() / 2, p.cols() / 2);
  for (int i = 0; i < out.rows(); ++i)
    for (int j = 0; j < out.cols(); ++j) out(i, j) = p.block(2 * i, 2 * j, 2, 2).mean();
  return out;
}

Plane scaled_levels(const Plane& p) { return (p.array().max(0.0).min(1.0) * 255.0).round().matrix(); }

}  // namespace

double mse_255(const Image& a, const Image& b) {
  require_same(a, b, "mse");
  double total = 0;
  for (int c = 0; c < a.channels(); ++c) total += (scaled_levels(a.planes[c]) - scaled_levels(b.planes[c])).squaredNorm();
  return total / static_cast<double>(a.size());
}

double psnr_from_mse(double mse) { return mse == 0 ? kPsnrIdentical : 10.0 * std::log10(255.0 * 255.0 / mse); }

double psnr(const Image& a, const Image& b) { return psnr_from_mse(mse_255(a, b)); }

int ms_ssim_scales(int min_side) {
  int s = 0;
  while (s < static_cast<int>(kScaleWeights.size()) && (min_side >> s) >= kWindow) ++s;
  return s;
}

double ms_ssim(const Image& a, const Image& b) {
  require_same(a, b, "ms_ssim");
  const int scales = ms_ssim_scales(std::min(a.height(), a.width()));
  if (scales == 0) throw ImageError("ms_ssim: image side must be at least 11 pixels");
  double wsum = 0;
  for (int s = 0; s < scales; ++s) wsum += kScaleWeights[s];
  const auto g = gaussian_kernel();
  double acc = 0;
  for (int c = 0; c < a.channels(); ++c) {
    Plane x = scaled_levels(a.planes[c]), y = scaled_levels(b.planes[c]);
    double v = 1.0;
    for (int s = 0; s < scales; ++s) {
      const auto [ssim, cs] = ssim_terms(x, y, g);
      const double term = s + 1 == scales ? ssim : cs;
      v *= std::pow(std::max(term, 0.0), kScaleWeights[s] / wsum);
      if (s + 1 < scales) {
        x = downsample(x);
        y = downsample(y);
      }
    }
    acc += v;
  }
  return acc / a.channels();
}

}  // namespace pstx
