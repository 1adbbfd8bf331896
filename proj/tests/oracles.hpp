#pragma once

#include "pstx/experiment.hpp"
#include "pstx/ldpc.hpp"

#include <functional>
#include <vector>

namespace oracle {

using pstx::Tensor;

/// Relative gradient error |a - n| / max(|a|, |n|, floor) maximized over all
/// entries of all `params`, with n from a fourth-order central difference of
/// `loss`. An entry that disagrees at step eps is re-estimated at eps/10 and
/// eps/100 and scored by its best estimate.
struct GradReport {
  double max_rel_error = 0;
  long long checked = 0;
  // Location and values of the worst entry.
  int worst_param = -1;
  long long worst_index = -1;
  double worst_analytic = 0;
  double worst_numeric = 0;
};
GradReport grad_check(const std::function<Tensor()>& loss, const std::vector<Tensor>& params, double eps = 1e-4,
                      double floor = 1e-6);

Tensor random_tensor(pstx::Shape shape, std::uint64_t seed, double scale = 1.0, bool requires_grad = true);

/// Direct-loop cross-correlation, no im2col.
Eigen::VectorXd naive_conv2d(const Tensor& x, const Tensor& w, const Tensor& b, int stride, int pad);
/// Scatter form of the transposed convolution.
Eigen::VectorXd naive_conv_transpose2d(const Tensor& x, const Tensor& w, const Tensor& b, int stride, int pad);

/// Direct cosine sums of the orthonormal 8x8 DCT-II.
Eigen::Matrix<double, 8, 8> naive_dct(const Eigen::Matrix<double, 8, 8>& block);

/// P(|X - mu| bin around s) by composite Simpson integration of the normal pdf.
double simpson_bin_probability(double s, double mu, double sigma);

/// Dense H built straight from the base table, and H c^T over GF(2).
std::vector<std::vector<std::uint8_t>> dense_parity_check(const pstx::fec::BaseMatrix& base);
int dense_syndrome_weight(const std::vector<std::vector<std::uint8_t>>& h, const std::vector<std::uint8_t>& c);

/// Reference SSIM (single scale, direct windowed sums) on 0..255 planes.
double naive_ssim(const pstx::Plane& x, const pstx::Plane& y);

/// Small model used by gradient checks: 16x16 inputs, tiny widths.
pstx::ModelConfig tiny_model_config();

}  // namespace oracle
