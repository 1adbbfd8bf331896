#include "pstx/train.hpp"

#include "pstx/optim.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace pstx {

namespace {

Image flip(const Image& img, bool horizontal, bool vertical) {
  Image out = img;
  for (auto& p : out.planes) {
    if (horizontal) p = p.rowwise().reverse().eval();
    if (vertical) p = p.colwise().reverse().eval();
  }
  return out;
}

Image crop(const Image& img, int top, int left, int side) {
  Image out;
  for (const auto& p : img.planes) out.planes.push_back(p.block(top, left, side, side));
  return out;
}

struct Batch {
  Tensor x, x_c_hat, x_r;
};

}  // namespace

void TrainConfig::validate() const {
  if (stage < 1 || stage > 3) throw std::invalid_argument("training stage must be 1, 2 or 3");
  if (!(lr > 0)) throw std::invalid_argument("learning rate must be positive");
  if (steps < 1 || batch < 1) throw std::invalid_argument("steps and batch must be positive");
  if (snr_choices.empty()) throw std::invalid_argument("training SNR set is empty");
  if (lambda1 < 0 || lambda2 < 0) throw std::invalid_argument("loss weights must be non-negative");
  if (stream_dropout < 0 || stream_dropout > 1) throw std::invalid_argument("stream_dropout must lie in [0, 1]");
  codec::QualityFactor check(q);
  (void)check;
}

Tensor rd_loss(const Tensor& x, const Tensor& x_hat, const Tensor& likelihood_s, const Tensor& likelihood_r,
               double lambda1, double lambda2, const PerceptualHook& perceptual) {
  Tensor loss = scale(mse(x, x_hat), kPixelScale2);
  if (lambda1 > 0 && likelihood_s.defined()) {
    loss = loss + scale(rate_term(likelihood_s, likelihood_r), lambda1 / static_cast<double>(x.numel()));
  }
  if (lambda2 > 0 && perceptual) loss = loss + scale(perceptual(x, x_hat), lambda2);
  return loss;
}

ForwardResult forward_train(const SemanticModel& model, const Tensor& x, const Tensor& x_c_hat, const Tensor& x_r,
                            SemanticMode mode, ChannelKind channel, double snr_db, CounterRng& rng) {
  if (mode == SemanticMode::off) throw std::invalid_argument("forward_train needs a semantic mode");
  const int batch = x.dim(0);
  ChannelConfig ch;
  ch.kind = channel;
  ch.snr_db = snr_db;
  auto noisy = [&](const Tensor& rows) {
    // rows [n, D]: normalize each row as complex pairs and add ZF noise.
    const int d = rows.dim(1);
    Eigen::VectorXd noise(rows.numel());
    for (int b = 0; b < rows.dim(0); ++b) {
      ch.seed = rng.next_u64();
      ch.block_len = (d + 1) / 2;
      noise.segment(static_cast<Eigen::Index>(b) * d, d) = equalized_noise(d, ch);
    }
    return normalize_power_rows(rows, ch.power) + Tensor::from(rows.shape(), std::move(noise));
  };

  const auto enc = model.encoder(x, x_r);
  ForwardResult out;
  Tensor s_hat;
  if (mode == SemanticMode::analog) {
    const Shape shape = enc.s.shape();
    const int d = static_cast<int>(enc.s.numel() / batch);
    s_hat = reshape(noisy(reshape(enc.s, {batch, d})), shape);
  } else {
    const Tensor s_t = quantize(enc.s, QuantMode::train, rng);
    const Tensor r_t = quantize(enc.r, QuantMode::train, rng);
    out.likelihood_s = likelihood(s_t, model.hyper(r_t));
    out.likelihood_r = model.prior.likelihood(r_t);
    std::vector<Tensor> items;
    for (int b = 0; b < batch; ++b) {
      const auto alloc = allocate_rates(out.likelihood_s, b, model.config.rho, model.config.rates);
      const Tensor z = model.ra.encode(slice0(s_t, b, 1), alloc);
      items.push_back(model.ra.decode(noisy(z), alloc));
    }
    s_hat = concat0(items);
  }
  out.x_hat = model.decoder(x_c_hat, s_hat, snr_db);
  return out;
}

TrainLog train(SemanticModel& model, const TrainConfig& cfg, const std::vector<Image>& data,
               const std::function<void(int, const TrainLog&)>& on_step) {
  cfg.validate();
  if (model.stage != cfg.stage - 1) {
    throw StageError("stage " + std::to_string(cfg.stage) + " needs a model that finished stage " +
                     std::to_string(cfg.stage - 1) + ", but its marker is " + std::to_string(model.stage));
  }
  if (data.empty()) throw std::invalid_argument("training set is empty");
  const int red = model.config.reduction();
  const int side = cfg.crop > 0 ? cfg.crop : data.front().height();
  for (const auto& img : data) {
    if (img.channels() != model.config.image_channels) throw DimensionError("training image channel mismatch");
    if (cfg.crop > 0 ? (img.height() < cfg.crop || img.width() < cfg.crop)
                     : (img.height() != side || img.width() != side)) {
      throw DimensionError("training images must be square and equally sized, or cropped");
    }
  }
  if (side % red) throw DimensionError("training image side must be a multiple of " + std::to_string(red));

  const ParamList trainable = cfg.stage == 2 ? model.ra_params() : model.params();
  const ParamList frozen = cfg.stage == 2 ? model.non_ra_params() : ParamList{};
  for (const auto& p : frozen) Tensor(p.tensor).set_requires_grad(false);
  std::vector<Tensor> tensors;
  for (const auto& p : trainable) tensors.push_back(p.tensor);
  Adam opt(tensors);

  PipelineConfig pc;
  pc.q = cfg.q;
  pc.channel.kind = cfg.channel;
  pc.mode = SemanticMode::off;
  const auto h = fec::build_qc_ldpc(resolve_code(cfg.code));
  const SemanticMode mode = cfg.stage == 1 ? SemanticMode::analog : SemanticMode::adaptive;

  CounterRng rng(cfg.seed, 0x7a11 + cfg.stage);
  TrainLog log;
  for (int step = 0; step < cfg.steps; ++step) {
    const double snr = cfg.snr_choices[rng.below(cfg.snr_choices.size())];
    pc.channel.snr_db = snr;
    std::vector<Image> xs, xcs, xrs;
    for (int b = 0; b < cfg.batch; ++b) {
      Image img = data[rng.below(data.size())];
      if (cfg.crop > 0) {
        const int top = static_cast<int>(rng.below(img.height() - cfg.crop + 1));
        const int left = static_cast<int>(rng.below(img.width() - cfg.crop + 1));
        img = crop(img, top, left, cfg.crop);
      }
      if (cfg.flips) {
        const bool fh = rng.below(2), fv = rng.below(2);
        img = flip(img, fh, fv);
      }
      TransmissionFrame frame;
      Image x_c, x_c_hat;
      if (cfg.simulate_image_stream) {
        auto conv = transmit_conventional(img, pc, h, rng.next_u64(), frame);
        x_c = std::move(conv.x_c);
        x_c_hat = std::move(conv.x_c_hat);
      } else {
        x_c = codec::decompress(codec::compress(img, codec::QualityFactor(cfg.q)));
        x_c_hat = x_c;
      }
      if (rng.uniform() < cfg.stream_dropout) x_c_hat = mid_gray(img.height(), img.width(), img.channels());
      xrs.push_back(residual(img, x_c));
      xcs.push_back(std::move(x_c_hat));
      xs.push_back(std::move(img));
    }
    const Tensor x = to_tensor(xs);
    const auto fwd = forward_train(model, x, to_tensor(xcs), to_tensor(xrs), mode, cfg.channel, snr, rng);
    const double l1 = cfg.stage == 1 ? 0.0 : cfg.lambda1;
    const Tensor loss = rd_loss(x, fwd.x_hat, fwd.likelihood_s, fwd.likelihood_r, l1, cfg.lambda2, cfg.perceptual);

    opt.zero_grad();
    backward(loss);
    double g2 = 0;
    for (const auto& t : tensors)
      if (t.has_grad()) g2 += t.grad().squaredNorm();
    log.grad_norm.push_back(std::sqrt(g2));
    const double lr = cfg.stage == 3 ? poly_lr(cfg.lr, step, cfg.steps, cfg.poly_power) : cfg.lr;
    opt.step(lr);

    log.loss.push_back(loss.item());
    {
      NoGradGuard guard;
      log.mse.push_back(kPixelScale2 * mse(x, fwd.x_hat).item());
      log.rate_bits.push_back(fwd.likelihood_s.defined()
                                  ? rate_term(fwd.likelihood_s, fwd.likelihood_r).item() / cfg.batch
                                  : 0.0);
    }
    if (on_step) on_step(step, log);
  }
  for (const auto& p : frozen) Tensor(p.tensor).set_requires_grad(true);
  model.stage = cfg.stage;
  return log;
}

}  // namespace pstx
