#pragma once

#include "pstx/layers.hpp"

#include <vector>

namespace pstx {

/// Dense block of three 3x3 convs; each conv sees the concatenation of the
/// block input and all earlier outputs. Output = x + scale * conv3(...).
struct DenseBlock {
  Conv2d c1, c2, c3;
  double residual_scale = 0.2;

  DenseBlock() = default;
  DenseBlock(int channels, int growth, CounterRng& rng);
  Tensor operator()(const Tensor& x) const;
  void collect(ParamList& out, const std::string& prefix) const;
};

/// Residual-in-residual dense block preceded by a 3x3 input conv.
struct Rrdb {
  Conv2d conv_in;
  std::vector<DenseBlock> blocks;
  double residual_scale = 0.2;

  Rrdb() = default;
  Rrdb(int in_channels, int features, int growth, int num_blocks, CounterRng& rng);
  Tensor operator()(const Tensor& x) const;
  void collect(ParamList& out, const std::string& prefix) const;
};

/// G_eta: (stride-2 conv, GDN, LeakyReLU) then (stride-1 conv, GDN, LeakyReLU).
struct LatentDown {
  Conv2d conv1, conv2;
  Gdn gdn1, gdn2;

  LatentDown() = default;
  LatentDown(int in_channels, int out_channels, CounterRng& rng);
  Tensor operator()(const Tensor& x) const;
  void collect(ParamList& out, const std::string& prefix) const;
};

constexpr int kSnrTableSize = 21;  // integer dB 0..20
constexpr int kSnrEmbedDim = 32;
/// Stream logits are soft-clipped to (-B, B), so neither weight drops below 1 / (1 + e^{2B}).
constexpr double kPagnetLogitBound = 2.0;

/// Integer table index for an SNR in dB: rounded, clamped to [0, 20].
int snr_index(double snr_db);

struct PagnetOutput {
  Tensor fused;     // w_v * v + w_u * u
  Tensor weight_v;  // [B,1,H,W]
  Tensor weight_u;  // [B,1,H,W]
};

/// SNR-conditioned per-pixel fusion of the semantic (v) and image (u) streams.
struct Pagnet {
  Conv2d conv_v, conv_u;
  Tensor snr_table;  // [21, 32]
  Linear snr_proj;   // 32 -> C
  Linear fc;         // C -> 1, shared across both streams

  Pagnet() = default;
  Pagnet(int channels, CounterRng& rng);
  PagnetOutput operator()(const Tensor& v, const Tensor& u, double snr_db) const;
  void collect(ParamList& out, const std::string& prefix) const;
};

/// Transposed conv (k=4, s=2, p=1) + IGDN + PReLU, or Sigmoid on the last level.
struct UpBlock {
  ConvTranspose2d up;
  Gdn igdn;
  PRelu act;
  bool last = false;

  UpBlock() = default;
  UpBlock(int in_channels, int out_channels, bool last, CounterRng& rng);
  Tensor operator()(const Tensor& x) const;
  void collect(ParamList& out, const std::string& prefix) const;
};

struct DecoderConfig {
  int image_channels = 3;
  int rrdb_features = 16;
  int rrdb_growth = 16;
  int rrdb_blocks = 3;
  /// Channel widths of u_1..u_L; the last entry must equal C_s.
  std::vector<int> latent_widths{16, 32, 64, 32};
};

struct DecoderTrace {
  std::vector<Tensor> latents;  // u_0..u_L
  std::vector<PagnetOutput> fusion;  // level 1..L
};

struct SemanticDecoder {
  Rrdb rrdb;
  std::vector<LatentDown> downs;
  std::vector<Pagnet> pagnets;
  std::vector<UpBlock> ups;

  SemanticDecoder() = default;
  SemanticDecoder(const DecoderConfig& cfg, CounterRng& rng);

  int levels() const { return static_cast<int>(downs.size()); }
  std::vector<Tensor> extract_latents(const Tensor& x_c) const;
  /// x_c [B,C,H,W], s_hat matching u_L. Output in (0,1), same dims as x_c.
  Tensor operator()(const Tensor& x_c, const Tensor& s_hat, double snr_db, DecoderTrace* trace = nullptr) const;
  void collect(ParamList& out, const std::string& prefix) const;
};

}  // namespace pstx
