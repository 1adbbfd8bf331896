#pragma once

#include "pstx/image.hpp"

#include <limits>

namespace pstx {

constexpr double kPsnrIdentical = std::numeric_limits<double>::infinity();

/// Mean squared error on the 0..255 scale.
double mse_255(const Image& a, const Image& b);
/// 10 log10(255^2 / MSE) on 8-bit levels; +inf for identical images.
double psnr(const Image& a, const Image& b);
double psnr_from_mse(double mse);

/// Multi-scale SSIM (Gaussian window 11, sigma 1.5, K1 0.01, K2 0.03).
/// Uses as many of the five standard scales as fit (each scale needs a side
/// of at least 11 pixels) with the scale weights renormalized. Per-channel
/// values are averaged.
double ms_ssim(const Image& a, const Image& b);
/// Number of scales used for an image whose shorter side is `min_side`.
int ms_ssim_scales(int min_side);

}  // namespace pstx
