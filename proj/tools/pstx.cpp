#include "pstx/experiment.hpp"
#include "pstx/metrics.hpp"
#include "pstx/qpsk.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <iterator>

using namespace pstx;

namespace {

struct ChannelFlags {
  std::string channel = "awgn";
  double snr_db = 10.0;
  std::uint64_t seed = 1;
  int trials = 1;
};

void add_channel_flags(CLI::App* app, ChannelFlags& f) {
  app->add_option("--channel", f.channel, "Channel model")->check(CLI::IsMember({"awgn", "rayleigh"}));
  app->add_option("--snr-db", f.snr_db, "Channel SNR in dB");
  app->add_option("--seed", f.seed, "Random seed");
  app->add_option("--trials", f.trials, "Number of Monte-Carlo trials")->check(CLI::PositiveNumber);
}

std::vector<std::uint8_t> read_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_bytes(const std::string& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("cannot write " + path);
}

std::string psnr_text(double v) {
  if (!std::isfinite(v)) return "inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

int cmd_train(const std::string& config_path, const std::string& output, int stage, const ChannelFlags& flags,
              const std::string& resume) {
  Config cfg;
  if (!config_path.empty()) cfg = Config::load(config_path);
  auto plan = TrainPlan::from(cfg);
  if (!output.empty()) plan.output = output;
  plan.base.channel = parse_channel_kind(flags.channel);
  plan.base.seed = flags.seed;
  const auto data = procedural_corpus(plan.corpus_count, plan.corpus_size, plan.corpus_seed);

  SemanticModel model = resume.empty() ? SemanticModel({}, plan.model_seed) : SemanticModel::load(resume);
  const int first = stage ? stage : model.stage + 1;
  const int last = stage ? stage : 3;
  const int steps[] = {0, plan.stage1_steps, plan.stage2_steps, plan.stage3_steps};
  for (int s = first; s <= last; ++s) {
    TrainConfig tc = plan.base;
    tc.stage = s;
    tc.steps = steps[s];
    const auto t0 = std::chrono::steady_clock::now();
    const auto log = train(model, tc, data, [&](int step, const TrainLog& l) {
      if (step % 25 == 0 || step + 1 == tc.steps) {
        std::printf("stage %d step %4d loss %.4f mse %.3f bits/image %.1f\n", s, step, l.loss.back(), l.mse.back(),
                    l.rate_bits.back());
      }
    });
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("stage %d done: %zu steps in %.1f s, final loss %.6f\n", s, log.loss.size(), secs, log.loss.back());
  }
  model.save(plan.output);
  std::printf("checkpoint written to %s (stage %d, %lld parameters)\n", plan.output.c_str(), model.stage,
              model.parameter_count());
  return 0;
}

int cmd_transmit(const std::string& in, const std::string& out, const std::string& checkpoint, int q,
                 const std::string& mode, const std::string& code, const ChannelFlags& flags) {
  const Image x = read_ppm(in);
  PipelineConfig pc;
  pc.q = q;
  pc.code = code;
  pc.mode = parse_semantic_mode(mode);
  pc.channel.kind = parse_channel_kind(flags.channel);
  pc.channel.snr_db = flags.snr_db;
  std::optional<SemanticModel> model;
  if (pc.mode != SemanticMode::off) {
    if (checkpoint.empty()) throw std::runtime_error("--checkpoint is required unless --mode off");
    model = SemanticModel::load(checkpoint);
  }
  const auto h = fec::build_qc_ldpc(resolve_code(code));
  std::printf("trial,seed,cbr,psnr_db,ms_ssim,corrupted\n");
  for (int t = 0; t < flags.trials; ++t) {
    const std::uint64_t seed = flags.seed + static_cast<std::uint64_t>(t);
    const auto res = transmit_image(x, pc, model ? &*model : nullptr, h, seed);
    std::printf("%d,%llu,%.6f,%s,%.6f,%d\n", t, static_cast<unsigned long long>(seed), res.frame.cbr(),
                psnr_text(psnr(x, res.x_hat)).c_str(), ms_ssim(x, res.x_hat), res.corrupted ? 1 : 0);
    if (t == 0 && !out.empty()) write_ppm(out, res.x_hat);
  }
  return 0;
}

int cmd_codec(const std::string& in, const std::string& out, const std::string& bitstream, int q) {
  const std::string ext = in.size() >= 4 ? in.substr(in.size() - 4) : "";
  if (ext == ".pst") {
    const Image img = codec::decompress({read_bytes(in)});
    if (!out.empty()) write_ppm(out, img);
    std::printf("decoded %dx%dx%d\n", img.height(), img.width(), img.channels());
    return 0;
  }
  const Image x = read_ppm(in);
  const auto bs = codec::compress(x, codec::QualityFactor(q));
  if (!bitstream.empty()) write_bytes(bitstream, bs.bytes);
  const Image y = codec::decompress(bs);
  if (!out.empty()) write_ppm(out, y);
  std::printf("q=%d bytes=%zu bpp=%.4f psnr_db=%s\n", q, bs.bytes.size(),
              8.0 * static_cast<double>(bs.bytes.size()) / (x.height() * x.width()), psnr_text(psnr(x, y)).c_str());
  return 0;
}

int cmd_fec_bench(const std::string& code, const std::vector<double>& snrs, int max_iter, const ChannelFlags& flags) {
  const auto h = fec::build_qc_ldpc(resolve_code(code));
  std::printf("code n=%d k=%d rate=%.4f\n", h.cols(), h.info_bits(), h.rate());
  std::printf("snr_db,frames,frame_errors,fer,bit_errors,ber,mean_iterations\n");
  for (double snr : snrs) {
    long long frame_errors = 0, bit_errors = 0, iters = 0;
    for (int t = 0; t < flags.trials; ++t) {
      const std::uint64_t seed = derive_seed(flags.seed, t, static_cast<std::uint64_t>(std::llround(snr * 1000)));
      CounterRng rng(seed, 0xb17);
      std::vector<std::uint8_t> info(h.info_bits());
      for (auto& b : info) b = static_cast<std::uint8_t>(rng.below(2));
      const auto cw = fec::ldpc_encode(h, info);
      ChannelConfig ch;
      ch.kind = parse_channel_kind(flags.channel);
      ch.snr_db = snr;
      ch.seed = seed;
      ch.block_len = h.cols() / 2;
      const auto out = transmit(fec::qpsk_modulate(cw), ch);
      const auto llr = fec::qpsk_soft_demod(out.y, out.realization.h, out.realization.sigma2);
      const auto dec = fec::ldpc_decode_bp(h, llr, max_iter);
      long long errs = 0;
      for (int i = 0; i < h.info_bits(); ++i) errs += dec.bits[i] != info[i];
      bit_errors += errs;
      frame_errors += errs > 0 || !dec.converged;
      iters += dec.iterations;
    }
    const double n = flags.trials;
    std::printf("%g,%d,%lld,%.6f,%lld,%.3e,%.2f\n", snr, flags.trials, frame_errors, frame_errors / n, bit_errors,
                bit_errors / (n * h.info_bits()), iters / n);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"pstx: parallel semantic + conventional image transmission simulator"};
  app.require_subcommand(1);

  ChannelFlags train_flags, tx_flags, bench_flags;
  std::string train_config, train_out, train_resume;
  int train_stage = 0;
  auto* train_cmd = app.add_subcommand("train", "Run the three-stage training schedule on the procedural corpus");
  train_cmd->add_option("--config", train_config, "INI config with a [train] section")->check(CLI::ExistingFile);
  train_cmd->add_option("--out", train_out, "Checkpoint path");
  train_cmd->add_option("--stage", train_stage, "Run only this stage (1-3)")->check(CLI::Range(1, 3));
  train_cmd->add_option("--resume", train_resume, "Checkpoint to continue from")->check(CLI::ExistingFile);
  add_channel_flags(train_cmd, train_flags);

  std::string tx_in, tx_out, tx_ckpt, tx_mode = "adaptive", tx_code = "desk";
  int tx_q = 30;
  auto* tx_cmd = app.add_subcommand("transmit", "Send one PPM image through the full pipeline");
  tx_cmd->add_option("--in", tx_in, "Input PPM")->required()->check(CLI::ExistingFile);
  tx_cmd->add_option("--out", tx_out, "Reconstruction PPM (first trial)");
  tx_cmd->add_option("--checkpoint", tx_ckpt, "Trained model");
  tx_cmd->add_option("--q", tx_q, "Codec quality factor")->check(CLI::Range(1, 100));
  tx_cmd->add_option("--mode", tx_mode, "Semantic branch")->check(CLI::IsMember({"off", "analog", "adaptive"}));
  tx_cmd->add_option("--code", tx_code, "LDPC code: desk, full or a base-matrix file");
  add_channel_flags(tx_cmd, tx_flags);

  std::string sweep_config;
  int sweep_trials = 0;
  auto* sweep_cmd = app.add_subcommand("sweep", "Run an experiment config and write CSV and plot data");
  sweep_cmd->add_option("config", sweep_config, "Experiment config")->required()->check(CLI::ExistingFile);
  sweep_cmd->add_option("--trials", sweep_trials, "Override the number of seeds")->check(CLI::PositiveNumber);

  std::string codec_in, codec_out, codec_bits;
  int codec_q = 50;
  auto* codec_cmd = app.add_subcommand("codec", "Compress/decompress round trip (.ppm in) or decode (.pst in)");
  codec_cmd->add_option("--in", codec_in, "Input PPM or .pst bitstream")->required()->check(CLI::ExistingFile);
  codec_cmd->add_option("--out", codec_out, "Decoded PPM");
  codec_cmd->add_option("--bitstream", codec_bits, "Write the compressed bitstream here");
  codec_cmd->add_option("--q", codec_q, "Quality factor")->check(CLI::Range(1, 100));

  std::string bench_code = "desk";
  std::vector<double> bench_snrs{2, 4, 6};
  int bench_iter = fec::kDefaultMaxIter;
  bench_flags.trials = 200;
  auto* bench_cmd = app.add_subcommand("fec-bench", "Monte-Carlo frame error rate of the LDPC code over QPSK");
  bench_cmd->add_option("--code", bench_code, "desk, full or a base-matrix file");
  bench_cmd->add_option("--snr-list", bench_snrs, "Es/N0 values in dB (overrides --snr-db)");
  bench_cmd->add_option("--max-iter", bench_iter, "BP iterations")->check(CLI::NonNegativeNumber);
  add_channel_flags(bench_cmd, bench_flags);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*train_cmd) return cmd_train(train_config, train_out, train_stage, train_flags, train_resume);
    if (*tx_cmd) return cmd_transmit(tx_in, tx_out, tx_ckpt, tx_q, tx_mode, tx_code, tx_flags);
    if (*sweep_cmd) {
      const auto path = run_experiment(sweep_config, sweep_trials > 0 ? std::optional<int>(sweep_trials) : std::nullopt);
      std::printf("wrote %s\n", path.c_str());
      return 0;
    }
    if (*codec_cmd) return cmd_codec(codec_in, codec_out, codec_bits, codec_q);
    if (*bench_cmd) {
      if (bench_cmd->count("--snr-db") && !bench_cmd->count("--snr-list")) bench_snrs = {bench_flags.snr_db};
      return cmd_fec_bench(bench_code, bench_snrs, bench_iter, bench_flags);
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
