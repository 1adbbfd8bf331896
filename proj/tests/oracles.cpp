#include "oracles.hpp"

#include <cmath>
#include <limits>
#include <numbers>

namespace oracle {

using Eigen::Index;
using Eigen::VectorXd;

GradReport grad_check(const std::function<Tensor()>& loss, const std::vector<Tensor>& params, double eps,
                      double floor) {
  for (auto p : params) p.zero_grad();
  pstx::backward(loss());
  std::vector<VectorXd> analytic;
  for (const auto& p : params) analytic.push_back(p.has_grad() ? p.grad() : VectorXd::Zero(p.numel()));
  GradReport rep;
  pstx::NoGradGuard guard;
  for (size_t k = 0; k < params.size(); ++k) {
    Tensor p = params[k];
    for (Index i = 0; i < p.numel(); ++i) {
      const double orig = p.value()[i];
      auto at = [&](double offset) {
        p.mutable_value()[i] = orig + offset;
        return loss().item();
      };
      // Fourth-order central stencil; retried at smaller steps when the
      // first estimate disagrees, since a kink inside the stencil (LeakyReLU,
      // rate ceiling) spoils it.
      const double a = analytic[k][i];
      double rel = std::numeric_limits<double>::infinity(), numeric = 0;
      for (double h = eps; h >= eps * 1e-2 && rel >= 1e-5; h *= 0.1) {
        const double n = (8 * (at(h) - at(-h)) - (at(2 * h) - at(-2 * h))) / (12 * h);
        const double r = std::abs(a - n) / std::max({std::abs(a), std::abs(n), floor});
        if (r < rel) {
          rel = r;
          numeric = n;
        }
      }
      p.mutable_value()[i] = orig;
      if (rel > rep.max_rel_error) {
        rep.max_rel_error = rel;
        rep.worst_param = static_cast<int>(k);
        rep.worst_index = i;
        rep.worst_analytic = a;
        rep.worst_numeric = numeric;
      }
      ++rep.checked;
    }
  }
  return rep;
}

Tensor random_tensor(pstx::Shape shape, std::uint64_t seed, double scale, bool requires_grad) {
  pstx::CounterRng rng(seed, 99);
  VectorXd v(pstx::shape_numel(shape));
  for (Index i = 0; i < v.size(); ++i) v[i] = scale * rng.normal();
  return Tensor::from(std::move(shape), std::move(v), requires_grad);
}

VectorXd naive_conv2d(const Tensor& x, const Tensor& w, const Tensor& b, int stride, int pad) {
  const int n = x.dim(0), ci = x.dim(1), h = x.dim(2), wd = x.dim(3);
  const int co = w.dim(0), k = w.dim(2);
  const int ho = (h + 2 * pad - k) / stride + 1, wo = (wd + 2 * pad - k) / stride + 1;
  VectorXd out(static_cast<Index>(n) * co * ho * wo);
  for (int bi = 0; bi < n; ++bi)
    for (int o = 0; o < co; ++o)
      for (int y = 0; y < ho; ++y)
        for (int xx = 0; xx < wo; ++xx) {
          double acc = b.value()[o];
          for (int c = 0; c < ci; ++c)
            for (int ky = 0; ky < k; ++ky)
              for (int kx = 0; kx < k; ++kx) {
                const int iy = y * stride - pad + ky, ix = xx * stride - pad + kx;
                if (iy < 0 || iy >= h || ix < 0 || ix >= wd) continue;
                acc += x.at({bi, c, iy, ix}) * w.at({o, c, ky, kx});
              }
          out[((static_cast<Index>(bi) * co + o) * ho + y) * wo + xx] = acc;
        }
  return out;
}

VectorXd naive_conv_transpose2d(const Tensor& x, const Tensor& w, const Tensor& b, int stride, int pad) {
  const int n = x.dim(0), ci = x.dim(1), h = x.dim(2), wd = x.dim(3);
  const int co = w.dim(1), k = w.dim(2);
  const int ho = (h - 1) * stride - 2 * pad + k, wo = (wd - 1) * stride - 2 * pad + k;
  VectorXd out(static_cast<Index>(n) * co * ho * wo);
  for (int bi = 0; bi < n; ++bi)
    for (int o = 0; o < co; ++o)
      for (Index i = 0; i < static_cast<Index>(ho) * wo; ++i) out[(static_cast<Index>(bi) * co + o) * ho * wo + i] = b.value()[o];
  for (int bi = 0; bi < n; ++bi)
    for (int c = 0; c < ci; ++c)
      for (int y = 0; y < h; ++y)
        for (int xx = 0; xx < wd; ++xx)
          for (int o = 0; o < co; ++o)
            for (int ky = 0; ky < k; ++ky)
              for (int kx = 0; kx < k; ++kx) {
                const int oy = y * stride - pad + ky, ox = xx * stride - pad + kx;
                if (oy < 0 || oy >= ho || ox < 0 || ox >= wo) continue;
                out[((static_cast<Index>(bi) * co + o) * ho + oy) * wo + ox] += x.at({bi, c, y, xx}) * w.at({c, o, ky, kx});
              }
  return out;
}

Eigen::Matrix<double, 8, 8> naive_dct(const Eigen::Matrix<double, 8, 8>& f) {
  Eigen::Matrix<double, 8, 8> out;
  for (int u = 0; u < 8; ++u)
    for (int v = 0; v < 8; ++v) {
      double acc = 0;
      for (int x = 0; x < 8; ++x)
        for (int y = 0; y < 8; ++y)
          acc += f(x, y) * std::cos((2 * x + 1) * u * std::numbers::pi / 16) *
                 std::cos((2 * y + 1) * v * std::numbers::pi / 16);
      const double cu = u == 0 ? std::sqrt(0.125) : 0.5, cv = v == 0 ? std::sqrt(0.125) : 0.5;
      out(u, v) = cu * cv * acc;
    }
  return out;
}

double simpson_bin_probability(double s, double mu, double sigma) {
  const int n = 20000;
  const double a = s - 0.5, b = s + 0.5, hstep = (b - a) / n;
  auto pdf = [&](double t) {
    const double z = (t - mu) / sigma;
    return std::exp(-0.5 * z * z) / (sigma * std::sqrt(2 * std::numbers::pi));
  };
  double acc = pdf(a) + pdf(b);
  for (int i = 1; i < n; ++i) acc += pdf(a + i * hstep) * (i % 2 ? 4 : 2);
  return acc * hstep / 3;
}

std::vector<std::vector<std::uint8_t>> dense_parity_check(const pstx::fec::BaseMatrix& base) {
  const int z = base.lift;
  std::vector<std::vector<std::uint8_t>> h(base.rows * z, std::vector<std::uint8_t>(base.cols * z, 0));
  for (int br = 0; br < base.rows; ++br)
    for (int bc = 0; bc < base.cols; ++bc) {
      const int s = base.shifts[br * base.cols + bc];
      if (s < 0) continue;
      for (int r = 0; r < z; ++r) h[br * z + r][bc * z + (r + s) % z] ^= 1;
    }
  return h;
}

int dense_syndrome_weight(const std::vector<std::vector<std::uint8_t>>& h, const std::vector<std::uint8_t>& c) {
  int w = 0;
  for (const auto& row : h) {
    int s = 0;
    for (size_t j = 0; j < row.size(); ++j) s ^= row[j] & c[j];
    w += s;
  }
  return w;
}

double naive_ssim(const pstx::Plane& x, const pstx::Plane& y) {
  const int win = 11;
  double g[win], gs = 0;
  for (int i = 0; i < win; ++i) {
    g[i] = std::exp(-(i - 5.0) * (i - 5.0) / (2 * 1.5 * 1.5));
    gs += g[i];
  }
  for (double& v : g) v /= gs;
  const double c1 = std::pow(0.01 * 255, 2), c2 = std::pow(0.03 * 255, 2);
  double total = 0;
  int count = 0;
  for (int i = 0; i + win <= x.rows(); ++i)
    for (int j = 0; j + win <= x.cols(); ++j) {
      double mx = 0, my = 0, sxx = 0, syy = 0, sxy = 0;
      for (int a = 0; a < win; ++a)
        for (int b = 0; b < win; ++b) {
          const double wt = g[a] * g[b];
          const double xv = x(i + a, j + b), yv = y(i + a, j + b);
          mx += wt * xv;
          my += wt * yv;
          sxx += wt * xv * xv;
          syy += wt * yv * yv;
          sxy += wt * xv * yv;
        }
      sxx -= mx * mx;
      syy -= my * my;
      sxy -= mx * my;
      total += ((2 * mx * my + c1) * (2 * sxy + c2)) / ((mx * mx + my * my + c1) * (sxx + syy + c2));
      ++count;
    }
  return total / count;
}

pstx::ModelConfig tiny_model_config() {
  pstx::ModelConfig c;
  c.encoder_widths = {2, 2, 2, 2};
  c.decoder.rrdb_features = 2;
  c.decoder.rrdb_growth = 2;
  c.decoder.rrdb_blocks = 1;
  c.decoder.latent_widths = {2, 2, 2, 2};
  c.rates.widths = {1, 2, 3, 4};
  return c;
}

}  // namespace oracle
