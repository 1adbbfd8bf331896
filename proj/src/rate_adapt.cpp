#include "pstx/rate_adapt.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace pstx {

RateSet RateSet::standard() {
  RateSet w;
  for (int v = 4; v <= 128; v += 4) w.widths.push_back(v);
  return w;
}

void RateSet::validate() const {
  if (widths.empty()) throw ParameterError("rate set is empty");
  for (size_t i = 0; i < widths.size(); ++i) {
    if (widths[i] <= 0) throw ParameterError("rate set entries must be positive");
    if (i && widths[i] <= widths[i - 1]) throw ParameterError("rate set must be strictly increasing");
  }
}

int RateSet::index_of(int w) const {
  auto it = std::lower_bound(widths.begin(), widths.end(), w);
  if (it == widths.end() || *it != w) throw ParameterError("width " + std::to_string(w) + " not in rate set");
  return static_cast<int>(it - widths.begin());
}

int RateSet::side_bits() const {
  int b = 0;
  while ((1 << b) < size()) ++b;
  return b;
}

double round_half_away(double v) { return std::round(v); }

Tensor quantize(const Tensor& t, QuantMode mode, CounterRng& rng) {
  Eigen::VectorXd delta(t.numel());
  if (mode == QuantMode::train) {
    for (Eigen::Index i = 0; i < delta.size(); ++i) delta[i] = rng.uniform() - 0.5;
  } else {
    for (Eigen::Index i = 0; i < delta.size(); ++i) delta[i] = round_half_away(t.value()[i]) - t.value()[i];
  }
  Tensor out = t + Tensor::from(t.shape(), std::move(delta));
  if (mode == QuantMode::test) {
    // Exact integers: the addition above can leave rounding residue.
    for (Eigen::Index i = 0; i < out.numel(); ++i) out.mutable_value()[i] = round_half_away(t.value()[i]);
  }
  return out;
}

HyperSynthesis::HyperSynthesis(int hyper_channels, int latent, CounterRng& rng)
    : c1(hyper_channels, latent, 3, 1, rng), c2(latent, 2 * latent, 3, 1, rng), latent_channels(latent) {}

EntropyParams HyperSynthesis::operator()(const Tensor& r_tilde) const {
  Tensor h = c2(leaky_relu(c1(r_tilde), kLeakySlope));
  Tensor mu = slice_channels(h, 0, latent_channels);
  Tensor sigma = add_scalar(softplus(slice_channels(h, latent_channels, latent_channels)), kSigmaFloor);
  return {mu, sigma};
}

void HyperSynthesis::collect(ParamList& out, const std::string& prefix) const {
  c1.collect(out, prefix + ".c1");
  c2.collect(out, prefix + ".c2");
}

Tensor likelihood(const Tensor& s_tilde, const EntropyParams& m) { return gaussian_likelihood(s_tilde, m.mu, m.sigma); }

FactorizedPrior::FactorizedPrior(int c, CounterRng& rng) : channels(c) {
  const std::vector<int> filters{1, 3, 3, 1};
  const double init_scale = 10.0;
  const double s = std::pow(init_scale, 1.0 / (filters.size() - 1));
  for (size_t i = 0; i + 1 < filters.size(); ++i) {
    const int in = filters[i], out = filters[i + 1];
    const double h0 = std::log(std::expm1(1.0 / s / out));
    matrices.push_back(Tensor::full({c, out, in}, h0, true));
    Eigen::VectorXd b(c * out);
    for (Eigen::Index j = 0; j < b.size(); ++j) b[j] = rng.uniform(-0.5, 0.5);
    biases.push_back(Tensor::from({c, out}, std::move(b), true));
    if (i + 2 < filters.size()) factors.push_back(Tensor::zeros({c, out}, true));
  }
}

Tensor FactorizedPrior::cdf_logit(const Tensor& x) const {
  Tensor h = x;
  for (size_t i = 0; i < matrices.size(); ++i) {
    h = add_bcast(bmm(softplus(matrices[i]), h), biases[i]);
    if (i < factors.size()) h = h + mul_bcast(tanh(h), tanh(factors[i]));
  }
  return h;
}

Tensor FactorizedPrior::likelihood(const Tensor& r) const {
  if (r.rank() != 4 || r.dim(1) != channels) {
    throw DimensionError("factorized prior: expected [B," + std::to_string(channels) + ",H,W], got " +
                         shape_string(r.shape()));
  }
  const int b = r.dim(0), h = r.dim(2), w = r.dim(3);
  const int n = b * h * w;
  Tensor x = reshape(transpose(to_patches(r)), {channels, 1, n});
  Tensor p = logistic_interval(cdf_logit(add_scalar(x, -0.5)), cdf_logit(add_scalar(x, 0.5)));
  p = clamp_min(p, kFloor);
  return from_patches(transpose(reshape(p, {channels, n})), b, h, w);
}

void FactorizedPrior::collect(ParamList& out, const std::string& prefix) const {
  for (size_t i = 0; i < matrices.size(); ++i) {
    out.push_back({prefix + ".H" + std::to_string(i), matrices[i]});
    out.push_back({prefix + ".b" + std::to_string(i), biases[i]});
    if (i < factors.size()) out.push_back({prefix + ".a" + std::to_string(i), factors[i]});
  }
}

long long RateAllocation::total() const {
  long long t = 0;
  for (int v : alpha_bar) t += v;
  return t;
}

int ceil_rate(double a, const RateSet& w, bool* clamped) {
  auto it = std::lower_bound(w.widths.begin(), w.widths.end(), a,
                             [](int wv, double av) { return static_cast<double>(wv) < av; });
  const bool over = it == w.widths.end();
  if (clamped) *clamped = over;
  return over ? w.max() : *it;
}

RateAllocation allocate_rates(const Tensor& lik, int index, double rho, const RateSet& w) {
  w.validate();
  if (lik.rank() != 4 || index < 0 || index >= lik.dim(0)) {
    throw DimensionError("allocate_rates: bad likelihood shape " + shape_string(lik.shape()) + " for item " +
                         std::to_string(index));
  }
  const int c = lik.dim(1), h = lik.dim(2), wd = lik.dim(3);
  const Eigen::Index plane = static_cast<Eigen::Index>(h) * wd;
  const double* base = lik.value().data() + index * c * plane;
  RateAllocation a;
  a.height = h;
  a.width = wd;
  a.alpha.assign(plane, 0.0);
  a.alpha_bar.resize(plane);
  for (int ch = 0; ch < c; ++ch)
    for (Eigen::Index i = 0; i < plane; ++i) a.alpha[i] -= rho * std::log2(base[ch * plane + i]);
  for (Eigen::Index i = 0; i < plane; ++i) {
    bool over = false;
    a.alpha_bar[i] = ceil_rate(a.alpha[i], w, &over);
    a.clamped += over;
  }
  return a;
}

RateCodec::RateCodec(RateSet r, int d, CounterRng& rng) : rates(std::move(r)), dim(d) {
  rates.validate();
  Eigen::VectorXd t(static_cast<Eigen::Index>(rates.size()) * dim);
  for (Eigen::Index i = 0; i < t.size(); ++i) t[i] = 0.1 * rng.normal();
  tokens = Tensor::from({rates.size(), dim}, std::move(t), true);
  for (int w : rates.widths) {
    encoders.emplace_back(dim, w, rng);
    decoders.emplace_back(w, dim, rng);
  }
}

Tensor RateCodec::encode(const Tensor& s, const RateAllocation& a) const {
  if (s.rank() != 4 || s.dim(0) != 1 || s.dim(1) != dim || s.dim(2) != a.height || s.dim(3) != a.width) {
    throw DimensionError("ra_encode: s " + shape_string(s.shape()) + " does not match the allocation grid");
  }
  Tensor patches = to_patches(s);
  std::vector<Tensor> parts;
  parts.reserve(a.patches());
  for (int i = 0; i < a.patches(); ++i) {
    const int m = rates.index_of(a.alpha_bar[i]);
    Tensor v = slice0(patches, i, 1) + slice0(tokens, m, 1);
    parts.push_back(reshape(encoders[m](v), {a.alpha_bar[i]}));
  }
  Tensor flat = concat0(parts);
  return reshape(flat, {1, flat.dim(0)});
}

Tensor RateCodec::decode(const Tensor& received, const RateAllocation& a) const {
  if (received.numel() != a.total()) {
    throw DimensionError("ra_decode: received " + std::to_string(received.numel()) + " reals, allocation needs " +
                         std::to_string(a.total()));
  }
  Tensor flat = reshape(received, {static_cast<int>(received.numel())});
  std::vector<Tensor> rows;
  rows.reserve(a.patches());
  int offset = 0;
  for (int i = 0; i < a.patches(); ++i) {
    const int w = a.alpha_bar[i];
    const int m = rates.index_of(w);
    rows.push_back(decoders[m](reshape(slice0(flat, offset, w), {1, w})));
    offset += w;
  }
  return from_patches(concat0(rows), 1, a.height, a.width);
}

void RateCodec::collect(ParamList& out, const std::string& prefix) const {
  out.push_back({prefix + ".tokens", tokens});
  for (size_t m = 0; m < encoders.size(); ++m) {
    encoders[m].collect(out, prefix + ".enc" + std::to_string(rates.widths[m]));
    decoders[m].collect(out, prefix + ".dec" + std::to_string(rates.widths[m]));
  }
}

ComplexSymbols pair_reals(std::span<const double> reals) {
  ComplexSymbols out((reals.size() + 1) / 2);
  for (size_t i = 0; i < out.size(); ++i) {
    out[i] = Complex(reals[2 * i], 2 * i + 1 < reals.size() ? reals[2 * i + 1] : 0.0);
  }
  return out;
}

std::vector<double> unpair_reals(std::span<const Complex> symbols, long long count) {
  if (static_cast<long long>(symbols.size()) != (count + 1) / 2) {
    throw DimensionError("semantic stream carries " + std::to_string(symbols.size()) + " symbols, expected " +
                         std::to_string((count + 1) / 2));
  }
  std::vector<double> out(count);
  for (long long i = 0; i < count; ++i) out[i] = i % 2 ? symbols[i / 2].imag() : symbols[i / 2].real();
  return out;
}

ComplexSymbols ra_encode(const Tensor& s, const RateAllocation& a, const RateCodec& codec) {
  NoGradGuard guard;
  const Tensor z = codec.encode(s, a);
  return pair_reals({z.value().data(), static_cast<size_t>(z.numel())});
}

Tensor ra_decode(std::span<const Complex> symbols, const RateAllocation& a, const RateCodec& codec) {
  NoGradGuard guard;
  auto reals = unpair_reals(symbols, a.total());
  Eigen::VectorXd v = Eigen::Map<const Eigen::VectorXd>(reals.data(), static_cast<Eigen::Index>(reals.size()));
  return codec.decode(Tensor::from({1, static_cast<int>(reals.size())}, std::move(v)), a);
}

Tensor rate_term(const Tensor& likelihood_s, const Tensor& likelihood_r) {
  return scale(sum(log2(likelihood_s)) + sum(log2(likelihood_r)), -1.0);
}

CbrReport cbr(const RateAllocation& a, long long m, long long k) {
  if (k <= 0) throw std::invalid_argument("cbr: source dimension k must be positive");
  return {static_cast<double>(a.symbols() + m) / static_cast<double>(k),
          static_cast<double>(a.total() + m) / static_cast<double>(k)};
}

std::vector<std::uint8_t> pack_rates(const RateAllocation& a, const RateSet& w) {
  const int bits = w.side_bits();
  std::vector<std::uint8_t> out;
  out.reserve(static_cast<size_t>(a.patches()) * bits);
  for (int v : a.alpha_bar) {
    const int idx = w.index_of(v);
    for (int b = bits - 1; b >= 0; --b) out.push_back(static_cast<std::uint8_t>((idx >> b) & 1));
  }
  return out;
}

std::vector<int> unpack_rates(std::span<const std::uint8_t> bits, int patches, const RateSet& w) {
  const int nb = w.side_bits();
  if (static_cast<long long>(bits.size()) != static_cast<long long>(patches) * nb) {
    throw DimensionError("side information length mismatch");
  }
  std::vector<int> out(patches);
  for (int i = 0; i < patches; ++i) {
    int idx = 0;
    for (int b = 0; b < nb; ++b) idx = (idx << 1) | (bits[static_cast<size_t>(i) * nb + b] & 1);
    if (idx >= w.size()) throw DimensionError("side information index out of range");
    out[i] = w.widths[idx];
  }
  return out;
}

}  // namespace pstx
