#pragma once

#include "pstx/tensor.hpp"

#include <vector>

// Differentiable tensor operations. Element-wise binary ops require identical
// shapes; the only broadcasting forms are the explicit per-channel/per-pixel
// helpers below.
namespace pstx {

// Element-wise arithmetic.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);
Tensor add_scalar(const Tensor& a, double offset);
Tensor square(const Tensor& a);

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }
inline Tensor operator*(double s, const Tensor& a) { return scale(a, s); }

// Element-wise nonlinearities.
Tensor sigmoid(const Tensor& x);
Tensor tanh(const Tensor& x);
Tensor softplus(const Tensor& x);
Tensor leaky_relu(const Tensor& x, double slope);
/// Natural log divided by ln 2; input must be positive.
Tensor log2(const Tensor& x);
/// max(x, floor) with zero gradient where the floor is active.
Tensor clamp_min(const Tensor& x, double floor);
/// Per-channel PReLU on [B,C,H,W] with slope [C].
Tensor prelu(const Tensor& x, const Tensor& slope);

// Reductions.
Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);
Tensor mse(const Tensor& a, const Tensor& b);

// Linear algebra.
/// [m,k] x [k,n] -> [m,n].
Tensor matmul(const Tensor& a, const Tensor& b);
/// Batched matmul [G,p,q] x [G,q,n] -> [G,p,n].
Tensor bmm(const Tensor& a, const Tensor& b);
/// x [G,p,n] + b [G,p] broadcast over the last axis.
Tensor add_bcast(const Tensor& x, const Tensor& b);
/// x [G,p,n] * a [G,p] broadcast over the last axis.
Tensor mul_bcast(const Tensor& x, const Tensor& a);
/// Fully connected: x [N,in], weight [out,in], bias [out] -> [N,out].
Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias);

// Convolutions on [B,C,H,W].
/// Cross-correlation with weight [C_out,C_in,k,k] (k odd), bias [C_out].
Tensor conv2d(const Tensor& input, const Tensor& weight, const Tensor& bias, int stride, int padding);
/// Adjoint of conv2d sharing its weight layout: weight [C_in,C_out,k,k] maps
/// C_in -> C_out channels and H -> (H-1)*stride - 2*padding + k.
Tensor conv_transpose2d(const Tensor& input, const Tensor& weight, const Tensor& bias, int stride,
                        int padding);

/// Divisive normalization y = x / sqrt(beta_i + sum_j gamma_ij x_j^2), or the
/// multiplicative inverse form when `inverse` is set. beta [C] > 0, gamma [C,C].
Tensor gdn(const Tensor& input, const Tensor& beta, const Tensor& gamma, bool inverse);

/// Softmax over axis 1 of [B,S,...]; S >= 2.
Tensor softmax_per_pixel(const Tensor& stack);

// Shape manipulation.
Tensor reshape(const Tensor& x, Shape shape);
/// [B,...] inputs -> [B,S,...].
Tensor stack(const std::vector<Tensor>& inputs);
/// Inverse of stack for one slot: [B,S,...] -> [B,...].
Tensor select(const Tensor& stacked, int slot);
/// Concatenation along axis 0; all inputs share the trailing shape.
Tensor concat0(const std::vector<Tensor>& inputs);
/// [m,n] -> [n,m].
Tensor transpose(const Tensor& x);
/// Rows [start, start+count) along axis 0.
Tensor slice0(const Tensor& x, int start, int count);
Tensor concat_channels(const Tensor& a, const Tensor& b);
Tensor slice_channels(const Tensor& x, int start, int count);
/// [B,C,H,W] -> [B*H*W, C], one row per spatial position.
Tensor to_patches(const Tensor& x);
/// [B*H*W, C] -> [B,C,H,W].
Tensor from_patches(const Tensor& patches, int batch, int height, int width);

// Broadcast products on [B,C,H,W].
/// x * v[c] with v of shape [C].
Tensor mul_channel(const Tensor& x, const Tensor& v);
/// x * w[b,0,h,w] with w of shape [B,1,H,W].
Tensor mul_pixel(const Tensor& x, const Tensor& w);

// Probability helpers.
/// Gaussian convolved with U(-1/2,1/2) evaluated at x, floored at 1e-12.
Tensor gaussian_likelihood(const Tensor& x, const Tensor& mu, const Tensor& sigma);
/// sigmoid(hi) - sigmoid(lo), computed without cancellation.
Tensor logistic_interval(const Tensor& lo, const Tensor& hi);

/// Scales each row of [B,D] (read as D/2 complex pairs, odd D zero-padded) to
/// average complex-symbol power `power`. All-zero rows pass through.
Tensor normalize_power_rows(const Tensor& x, double power);

/// Standard normal CDF.
double normal_cdf(double t);

}  // namespace pstx
