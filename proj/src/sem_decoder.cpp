#include "pstx/sem_decoder.hpp"

#include <algorithm>
#include <cmath>

namespace pstx {

DenseBlock::DenseBlock(int channels, int growth, CounterRng& rng)
    : c1(channels, growth, 3, 1, rng),
      c2(channels + growth, growth, 3, 1, rng),
      c3(channels + 2 * growth, channels, 3, 1, rng) {}

Tensor DenseBlock::operator()(const Tensor& x) const {
  Tensor a = leaky_relu(c1(x), kLeakySlope);
  Tensor xa = concat_channels(x, a);
  Tensor b = leaky_relu(c2(xa), kLeakySlope);
  Tensor c = c3(concat_channels(xa, b));
  return x + scale(c, residual_scale);
}

void DenseBlock::collect(ParamList& out, const std::string& prefix) const {
  c1.collect(out, prefix + ".c1");
  c2.collect(out, prefix + ".c2");
  c3.collect(out, prefix + ".c3");
}

Rrdb::Rrdb(int in_channels, int features, int growth, int num_blocks, CounterRng& rng)
    : conv_in(in_channels, features, 3, 1, rng) {
  for (int i = 0; i < num_blocks; ++i) blocks.emplace_back(features, growth, rng);
}

Tensor Rrdb::operator()(const Tensor& x) const {
  Tensor f = conv_in(x);
  Tensor h = f;
  for (const auto& b : blocks) h = b(h);
  return f + scale(h, residual_scale);
}

void Rrdb::collect(ParamList& out, const std::string& prefix) const {
  conv_in.collect(out, prefix + ".conv_in");
  for (size_t i = 0; i < blocks.size(); ++i) blocks[i].collect(out, prefix + ".db" + std::to_string(i));
}

LatentDown::LatentDown(int in_channels, int out_channels, CounterRng& rng)
    : conv1(in_channels, out_channels, 3, 2, rng),
      conv2(out_channels, out_channels, 3, 1, rng),
      gdn1(out_channels, false),
      gdn2(out_channels, false) {}

Tensor LatentDown::operator()(const Tensor& x) const {
  Tensor h = leaky_relu(gdn1(conv1(x)), kLeakySlope);
  return leaky_relu(gdn2(conv2(h)), kLeakySlope);
}

void LatentDown::collect(ParamList& out, const std::string& prefix) const {
  conv1.collect(out, prefix + ".conv1");
  gdn1.collect(out, prefix + ".gdn1");
  conv2.collect(out, prefix + ".conv2");
  gdn2.collect(out, prefix + ".gdn2");
}

int snr_index(double snr_db) {
  const double r = std::round(snr_db);
  return static_cast<int>(std::clamp(r, 0.0, static_cast<double>(kSnrTableSize - 1)));
}

Pagnet::Pagnet(int channels, CounterRng& rng)
    : conv_v(channels, channels, 3, 1, rng),
      conv_u(channels, channels, 3, 1, rng),
      snr_proj(kSnrEmbedDim, channels, rng),
      fc(channels, 1, rng) {
  Eigen::VectorXd table(kSnrTableSize * kSnrEmbedDim);
  for (Eigen::Index i = 0; i < table.size(); ++i) table[i] = rng.normal();
  snr_table = Tensor::from({kSnrTableSize, kSnrEmbedDim}, std::move(table), true);
}

PagnetOutput Pagnet::operator()(const Tensor& v, const Tensor& u, double snr_db) const {
  if (v.shape() != u.shape()) {
    throw DimensionError("PAGNet: stream shapes differ, v " + shape_string(v.shape()) + " vs u " +
                         shape_string(u.shape()));
  }
  const int b = v.dim(0), c = v.dim(1), h = v.dim(2), w = v.dim(3);
  Tensor embed = reshape(snr_proj(slice0(snr_table, snr_index(snr_db), 1)), {c});
  auto logits = [&](const Conv2d& conv, const Tensor& t) {
    Tensor feat = mul_channel(conv(t), embed);
    const Tensor logit = from_patches(fc(to_patches(feat)), b, h, w);
    return scale(tanh(scale(logit, 1.0 / kPagnetLogitBound)), kPagnetLogitBound);
  };
  Tensor weights = softmax_per_pixel(stack({logits(conv_v, v), logits(conv_u, u)}));
  Tensor wv = select(weights, 0), wu = select(weights, 1);
  return {mul_pixel(v, wv) + mul_pixel(u, wu), wv, wu};
}

void Pagnet::collect(ParamList& out, const std::string& prefix) const {
  conv_v.collect(out, prefix + ".conv_v");
  conv_u.collect(out, prefix + ".conv_u");
  out.push_back({prefix + ".snr_table", snr_table});
  snr_proj.collect(out, prefix + ".snr_proj");
  fc.collect(out, prefix + ".fc");
}

UpBlock::UpBlock(int in_channels, int out_channels, bool is_last, CounterRng& rng)
    : up(in_channels, out_channels, 4, 2, 1, rng), igdn(out_channels, true), last(is_last) {
  if (!last) act = PRelu(out_channels);
}

Tensor UpBlock::operator()(const Tensor& x) const {
  Tensor h = igdn(up(x));
  return last ? sigmoid(h) : act(h);
}

void UpBlock::collect(ParamList& out, const std::string& prefix) const {
  up.collect(out, prefix + ".up");
  igdn.collect(out, prefix + ".igdn");
  if (!last) act.collect(out, prefix + ".prelu");
}

SemanticDecoder::SemanticDecoder(const DecoderConfig& cfg, CounterRng& rng)
    : rrdb(cfg.image_channels, cfg.rrdb_features, cfg.rrdb_growth, cfg.rrdb_blocks, rng) {
  const auto& u = cfg.latent_widths;
  const int levels = static_cast<int>(u.size());
  if (levels < 1) throw ParameterError("decoder needs at least one latent level");
  int c = cfg.rrdb_features;
  for (int l = 0; l < levels; ++l) {
    downs.emplace_back(c, u[l], rng);
    c = u[l];
  }
  // Level l fuses v_{l-1} with u_{L+1-l}, then up-samples to the width of u_{L-l}.
  for (int l = 1; l <= levels; ++l) {
    const int in = u[levels - l];
    const int out = l == levels ? cfg.image_channels : u[levels - l - 1];
    pagnets.emplace_back(in, rng);
    ups.emplace_back(in, out, l == levels, rng);
  }
}

std::vector<Tensor> SemanticDecoder::extract_latents(const Tensor& x_c) const {
  std::vector<Tensor> u{rrdb(x_c)};
  for (const auto& d : downs) u.push_back(d(u.back()));
  return u;
}

Tensor SemanticDecoder::operator()(const Tensor& x_c, const Tensor& s_hat, double snr_db, DecoderTrace* trace) const {
  auto u = extract_latents(x_c);
  const int levels = this->levels();
  if (s_hat.shape() != u[levels].shape()) {
    throw DimensionError("decoder: s_hat " + shape_string(s_hat.shape()) + " does not match u_L " +
                         shape_string(u[levels].shape()));
  }
  Tensor v = s_hat;
  for (int l = 1; l <= levels; ++l) {
    auto fused = pagnets[l - 1](v, u[levels + 1 - l], snr_db);
    v = ups[l - 1](fused.fused);
    if (trace) trace->fusion.push_back(std::move(fused));
  }
  if (trace) trace->latents = std::move(u);
  return v;
}

void SemanticDecoder::collect(ParamList& out, const std::string& prefix) const {
  rrdb.collect(out, prefix + ".rrdb");
  for (int l = 0; l < levels(); ++l) {
    const auto s = std::to_string(l + 1);
    downs[l].collect(out, prefix + ".down" + s);
    pagnets[l].collect(out, prefix + ".pagnet" + s);
    ups[l].collect(out, prefix + ".up" + s);
  }
}

}  // namespace pstx
