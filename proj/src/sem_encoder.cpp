#include "pstx/sem_encoder.hpp"

namespace pstx {

DownPair::DownPair(int in_channels, int out_channels, CounterRng& rng)
    : first(in_channels, out_channels, 3, 2, rng), second(out_channels, out_channels, 3, 1, rng) {}

Tensor DownPair::operator()(const Tensor& x) const {
  return leaky_relu(second(leaky_relu(first(x), kLeakySlope)), kLeakySlope);
}

void DownPair::collect(ParamList& out, const std::string& prefix) const {
  first.collect(out, prefix + ".0");
  second.collect(out, prefix + ".1");
}

Rem::Rem(int in_channels, int out_channels, bool is_last, CounterRng& rng)
    : down_y(in_channels, out_channels, rng),
      down_r(in_channels, out_channels, rng),
      attention(out_channels, out_channels, 3, 1, rng),
      last(is_last) {
  if (!last) mix = Conv2d(2 * out_channels, out_channels, 1, 1, rng);
}

Rem::Output Rem::operator()(const Tensor& y, const Tensor& r) const {
  if (y.rank() != 4 || r.rank() != 4 || y.dim(0) != r.dim(0) || y.dim(2) != r.dim(2) || y.dim(3) != r.dim(3)) {
    throw DimensionError("REM: image path " + shape_string(y.shape()) + " and residual path " +
                         shape_string(r.shape()) + " must share batch and spatial dims");
  }
  Tensor y_hat = down_y(y);
  Tensor r_hat = down_r(r);
  Tensor att = sigmoid(attention(r_hat));
  Tensor y_next = y_hat + y_hat * att;
  Tensor r_next = last ? r_hat : mix(concat_channels(r_hat, y_next));
  return {y_next, r_next, att};
}

void Rem::collect(ParamList& out, const std::string& prefix) const {
  down_y.collect(out, prefix + ".down_y");
  down_r.collect(out, prefix + ".down_r");
  attention.collect(out, prefix + ".attention");
  if (!last) mix.collect(out, prefix + ".mix");
}

SemanticEncoder::SemanticEncoder(int in_channels, const std::vector<int>& widths, CounterRng& rng) {
  int c = in_channels;
  for (size_t j = 0; j < widths.size(); ++j) {
    rems.emplace_back(c, widths[j], j + 1 == widths.size(), rng);
    c = widths[j];
  }
}

EncoderOutput SemanticEncoder::operator()(const Tensor& x, const Tensor& x_r) const {
  Tensor y = x, r = x_r;
  for (const auto& rem : rems) {
    auto o = rem(y, r);
    y = o.y;
    r = o.r;
  }
  return {y, r};
}

void SemanticEncoder::collect(ParamList& out, const std::string& prefix) const {
  for (size_t j = 0; j < rems.size(); ++j) rems[j].collect(out, prefix + ".rem" + std::to_string(j));
}

}  // namespace pstx
