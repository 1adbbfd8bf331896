#include "pstx/pipeline.hpp"

#include "pstx/qpsk.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>

namespace pstx {

namespace {

constexpr double kGainFloor = 1e-6;

ComplexSymbols equalize(const ChannelOutput& out) {
  ComplexSymbols r(out.y.size());
  for (size_t i = 0; i < r.size(); ++i) {
    const auto& h = out.realization.h[i];
    r[i] = std::conj(h) * out.y[i] / std::max(std::norm(h), kGainFloor);
  }
  return r;
}

std::vector<std::uint8_t> to_bits(const std::vector<std::uint8_t>& bytes) {
  std::vector<std::uint8_t> bits(bytes.size() * 8);
  for (size_t i = 0; i < bytes.size(); ++i)
    for (int b = 0; b < 8; ++b) bits[8 * i + b] = (bytes[i] >> (7 - b)) & 1;
  return bits;
}

std::vector<std::uint8_t> to_bytes(const std::vector<std::uint8_t>& bits) {
  std::vector<std::uint8_t> bytes(bits.size() / 8, 0);
  for (size_t i = 0; i < bytes.size() * 8; ++i) bytes[i / 8] |= static_cast<std::uint8_t>((bits[i] & 1) << (7 - i % 8));
  return bytes;
}

struct ImageStream {
  Image x_c_hat;
  bool failed = false;
};

ImageStream send_image_stream(const codec::Bitstream& bs, const Image& x, const PipelineConfig& cfg,
                              const fec::ParityCheckMatrix& h, std::uint64_t seed, TransmissionFrame& frame) {
  const int kc = h.info_bits(), nc = h.cols();
  const auto bits = to_bits(bs.bytes);
  frame.codec_bits = static_cast<long long>(bits.size());

  // Segment, encode, and drop the shortened positions of the last frame.
  std::vector<std::uint8_t> sent;
  for (size_t start = 0; start < bits.size(); start += kc) {
    FrameSegment seg;
    seg.info_bits = static_cast<int>(std::min<size_t>(kc, bits.size() - start));
    seg.pad_bits = kc - seg.info_bits;
    seg.sent_bits = nc - seg.pad_bits;
    std::vector<std::uint8_t> info(kc, 0);
    std::copy_n(bits.begin() + static_cast<long>(start), seg.info_bits, info.begin());
    const auto cw = fec::ldpc_encode(h, info);
    sent.insert(sent.end(), cw.begin(), cw.begin() + seg.info_bits);
    sent.insert(sent.end(), cw.begin() + kc, cw.end());
    frame.segments.push_back(seg);
  }

  auto symbols = normalize_power(fec::qpsk_modulate(sent), cfg.channel.power);
  frame.m = static_cast<long long>(symbols.size());
  ChannelConfig ch = cfg.channel;
  ch.seed = image_stream_seed(seed);
  ch.block_len = nc / 2;
  const auto out = transmit(symbols, ch);
  const auto llr = fec::qpsk_soft_demod(out.y, out.realization.h, out.realization.sigma2);

  std::vector<std::uint8_t> received;
  received.reserve(bits.size());
  size_t pos = 0;
  bool all_converged = true;
  for (auto& seg : frame.segments) {
    std::vector<double> frame_llr(nc, fec::kLlrClip);
    std::copy_n(llr.begin() + static_cast<long>(pos), seg.info_bits, frame_llr.begin());
    std::copy_n(llr.begin() + static_cast<long>(pos + seg.info_bits), nc - kc, frame_llr.begin() + kc);
    pos += seg.sent_bits;
    const auto dec = fec::ldpc_decode_bp(h, frame_llr, cfg.max_iter);
    seg.converged = dec.converged;
    seg.iterations = dec.iterations;
    all_converged = all_converged && dec.converged;
    received.insert(received.end(), dec.bits.begin(), dec.bits.begin() + seg.info_bits);
  }

  ImageStream result;
  result.failed = !all_converged;
  try {
    Image decoded = codec::decompress({to_bytes(received)});
    if (!decoded.same_dims(x)) throw codec::CodecError("decoded dimensions differ from the frame table", 0);
    result.x_c_hat = std::move(decoded);
  } catch (const codec::CodecError&) {
    result.failed = true;
    result.x_c_hat = mid_gray(x.height(), x.width(), x.channels());
  }
  return result;
}

// Sends the real vector z (power-normalized as complex pairs) over the
// semantic channel and returns the ZF-equalized reals.
Eigen::VectorXd send_semantic(const Eigen::VectorXd& z, const PipelineConfig& cfg, std::uint64_t seed) {
  auto symbols = normalize_power(pair_reals({z.data(), static_cast<size_t>(z.size())}), cfg.channel.power);
  ChannelConfig ch = cfg.channel;
  ch.seed = semantic_stream_seed(seed);
  ch.block_len = std::max<int>(1, static_cast<int>(symbols.size()));
  const auto eq = equalize(transmit(symbols, ch));
  const auto reals = unpair_reals(eq, z.size());
  return Eigen::Map<const Eigen::VectorXd>(reals.data(), static_cast<Eigen::Index>(reals.size()));
}

}  // namespace

SemanticMode parse_semantic_mode(const std::string& name) {
  if (name == "off") return SemanticMode::off;
  if (name == "analog") return SemanticMode::analog;
  if (name == "adaptive") return SemanticMode::adaptive;
  throw std::invalid_argument("unknown semantic mode '" + name + "' (expected off, analog or adaptive)");
}

std::string semantic_mode_name(SemanticMode mode) {
  switch (mode) {
    case SemanticMode::off: return "off";
    case SemanticMode::analog: return "analog";
    case SemanticMode::adaptive: return "adaptive";
  }
  return "?";
}

void PipelineConfig::validate() const {
  codec::QualityFactor check(q);
  (void)check;
  channel.validate();
  if (lambda1 < 0 || lambda2 < 0) throw std::invalid_argument("loss weights must be non-negative");
  if (max_iter < 0) throw std::invalid_argument("max_iter must be non-negative");
}

fec::BaseMatrix resolve_code(const std::string& code) {
  if (code == "desk") return fec::desk_base_matrix();
  if (code == "full") return fec::full_base_matrix();
  if (std::filesystem::exists(code)) return fec::load_base_matrix(code);
  throw fec::LdpcError("unknown code '" + code + "' (expected desk, full or a base-matrix file)");
}

std::uint64_t image_stream_seed(std::uint64_t seed) { return derive_seed(seed, 1); }
std::uint64_t semantic_stream_seed(std::uint64_t seed) { return derive_seed(seed, 2); }

Eigen::VectorXd equalized_noise(long long reals, const ChannelConfig& cfg) {
  const ComplexSymbols zero((reals + 1) / 2, Complex(0, 0));
  const auto eq = equalize(transmit(zero, cfg));
  const auto v = unpair_reals(eq, reals);
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

Image residual(const Image& x, const Image& x_c) {
  if (!x.same_dims(x_c)) throw ImageError("residual: image dimensions differ");
  auto a = to_levels(x);
  const auto b = to_levels(x_c);
  Image r(x.height(), x.width(), x.channels());
  size_t i = 0;
  for (int c = 0; c < r.channels(); ++c)
    for (int y = 0; y < r.height(); ++y)
      for (int xx = 0; xx < r.width(); ++xx, ++i) r.planes[c](y, xx) = (a[i] - b[i]) / 255.0;
  return r;
}

Image mid_gray(int height, int width, int channels) { return Image(height, width, channels, 128.0 / 255.0); }

ConventionalResult transmit_conventional(const Image& x, const PipelineConfig& cfg, const fec::ParityCheckMatrix& h,
                                         std::uint64_t seed, TransmissionFrame& frame) {
  ConventionalResult res;
  const Image xq = quantize_levels(x);
  const auto bs = codec::compress(xq, codec::QualityFactor(cfg.q));
  res.x_c = codec::decompress(bs);
  auto stream = send_image_stream(bs, xq, cfg, h, seed, frame);
  res.x_c_hat = std::move(stream.x_c_hat);
  res.failed = stream.failed;
  return res;
}

TransmitResult transmit_image(const Image& x, const PipelineConfig& cfg, const SemanticModel* model,
                              const fec::ParityCheckMatrix& h, std::uint64_t seed) {
  cfg.validate();
  if (cfg.mode != SemanticMode::off && !model) throw std::invalid_argument("semantic mode needs a model");
  TransmitResult res;
  res.frame.k = x.size();
  const Image xq = quantize_levels(x);
  auto conv = transmit_conventional(xq, cfg, h, seed, res.frame);
  res.x_c = std::move(conv.x_c);
  res.x_c_hat = std::move(conv.x_c_hat);
  res.corrupted = conv.failed;

  if (cfg.mode == SemanticMode::off) {
    res.x_hat = res.x_c_hat;
    return res;
  }

  NoGradGuard guard;
  const int red = model->config.reduction();
  if (x.height() % red || x.width() % red) {
    throw DimensionError("image sides must be multiples of " + std::to_string(red) + " for the semantic branch");
  }
  const Tensor xt = to_tensor(xq);
  const Tensor xr = to_tensor(residual(xq, res.x_c));
  const auto enc = model->encoder(xt, xr);

  Tensor s_hat;
  if (cfg.mode == SemanticMode::analog) {
    const Eigen::VectorXd rx = send_semantic(enc.s.value(), cfg, seed);
    res.frame.semantic_reals = enc.s.numel();
    s_hat = Tensor::from(enc.s.shape(), rx);
  } else {
    CounterRng unused(0);
    const Tensor s_t = quantize(enc.s, QuantMode::test, unused);
    const Tensor r_t = quantize(enc.r, QuantMode::test, unused);
    const Tensor lik = likelihood(s_t, model->hyper(r_t));
    auto alloc = allocate_rates(lik, 0, model->config.rho, model->config.rates);
    res.clamped_patches = alloc.clamped;

    // Side information travels out of band; the receiver rebuilds its
    // allocation from the unpacked indices only.
    const auto side = pack_rates(alloc, model->config.rates);
    res.frame.side_bits = static_cast<long long>(side.size());
    RateAllocation rx_alloc;
    rx_alloc.height = alloc.height;
    rx_alloc.width = alloc.width;
    rx_alloc.alpha_bar = unpack_rates(side, alloc.patches(), model->config.rates);

    const Tensor z = model->ra.encode(s_t, alloc);
    const Eigen::VectorXd rx = send_semantic(z.value(), cfg, seed);
    res.frame.semantic_reals = z.numel();
    res.frame.alpha_bar = alloc.alpha_bar;
    s_hat = model->ra.decode(Tensor::from({1, static_cast<int>(rx.size())}, rx), rx_alloc);
  }
  res.frame.semantic_symbols = (res.frame.semantic_reals + 1) / 2;
  res.frame.side_symbols = (res.frame.side_bits + 1) / 2;

  const Tensor out = model->decoder(to_tensor(res.x_c_hat), s_hat, cfg.channel.snr_db);
  res.x_hat = to_image(out);
  return res;
}

}  // namespace pstx
