#include "pstx/experiment.hpp"

#include "pstx/metrics.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <thread>

namespace pstx {

namespace {

const std::vector<std::string> kSweepKeys{
    "experiment.name",  "experiment.output_dir", "sweep.snr_db",   "sweep.q",        "sweep.seeds",
    "sweep.seed",       "sweep.channel",         "sweep.mode",     "sweep.code",     "sweep.max_iter",
    "sweep.threads",    "model.checkpoint",      "data.images",    "data.count",     "data.size",
    "data.seed"};

const std::vector<std::string> kTrainKeys{
    "train.stage1_steps", "train.stage2_steps", "train.stage3_steps", "train.batch",   "train.lr",
    "train.q",            "train.snr_db",       "train.channel",      "train.lambda1", "train.lambda2",
    "train.seed",         "train.flips",        "train.crop",         "train.code",    "train.simulate_image_stream", "train.stream_dropout",
    "train.output",       "train.model_seed",   "data.count",         "data.size",     "data.seed"};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

double metric_of(const MetricsRow& r, const std::string& m) {
  if (m == "cbr") return r.cbr;
  if (m == "psnr_db") return r.psnr_db;
  if (m == "ms_ssim") return r.ms_ssim;
  if (m == "corruption_rate") return r.corruption_rate;
  throw std::invalid_argument("unknown metric '" + m + "'");
}

}  // namespace

SweepConfig SweepConfig::from(const Config& c) {
  c.require_known(kSweepKeys);
  SweepConfig s;
  s.name = c.get_string("experiment.name", s.name);
  s.output_dir = c.get_string("experiment.output_dir", s.output_dir);
  s.snr_db = c.get_doubles("sweep.snr_db", s.snr_db);
  s.q.clear();
  for (double v : c.get_doubles("sweep.q", {30})) s.q.push_back(static_cast<int>(std::lround(v)));
  s.seeds = static_cast<int>(c.get_int("sweep.seeds", s.seeds));
  s.base_seed = static_cast<std::uint64_t>(c.get_int("sweep.seed", static_cast<long long>(s.base_seed)));
  s.channel = parse_channel_kind(c.get_string("sweep.channel", "awgn"));
  s.mode = parse_semantic_mode(c.get_string("sweep.mode", "off"));
  s.code = c.get_string("sweep.code", s.code);
  s.max_iter = static_cast<int>(c.get_int("sweep.max_iter", s.max_iter));
  s.threads = static_cast<int>(c.get_int("sweep.threads", s.threads));
  s.checkpoint = c.get_string("model.checkpoint", "");
  s.images = c.get_strings("data.images", {});
  s.corpus_count = static_cast<int>(c.get_int("data.count", s.corpus_count));
  s.corpus_size = static_cast<int>(c.get_int("data.size", s.corpus_size));
  s.corpus_seed = static_cast<std::uint64_t>(c.get_int("data.seed", static_cast<long long>(s.corpus_seed)));
  if (s.seeds < 1) throw ConfigError("sweep.seeds must be >= 1", 0);
  if (s.snr_db.empty() || s.q.empty()) throw ConfigError("sweep needs at least one snr_db and q value", 0);
  for (int q : s.q) codec::QualityFactor check(q);
  if (s.mode != SemanticMode::off && s.checkpoint.empty()) {
    throw ConfigError("sweep.mode " + semantic_mode_name(s.mode) + " needs model.checkpoint", 0);
  }
  return s;
}

std::vector<Image> sweep_images(const SweepConfig& cfg) {
  if (cfg.images.empty()) return procedural_corpus(cfg.corpus_count, cfg.corpus_size, cfg.corpus_seed);
  std::vector<Image> out;
  for (const auto& p : cfg.images) out.push_back(read_ppm(p));
  return out;
}

std::vector<MetricsRow> run_sweep(const SweepConfig& cfg, const std::vector<Image>& images,
                                  const SemanticModel* model) {
  if (images.empty()) throw std::invalid_argument("sweep has no images");
  const auto h = fec::build_qc_ldpc(resolve_code(cfg.code));

  struct Job {
    double snr;
    int q;
    int trial;
  };
  std::vector<Job> jobs;
  for (double snr : cfg.snr_db)
    for (int q : cfg.q)
      for (int t = 0; t < cfg.seeds; ++t) jobs.push_back({snr, q, t});

  std::vector<MetricsRow> rows(jobs.size());
  auto run_job = [&](size_t j) {
    const auto& job = jobs[j];
    PipelineConfig pc;
    pc.q = job.q;
    pc.code = cfg.code;
    pc.mode = cfg.mode;
    pc.max_iter = cfg.max_iter;
    pc.channel.kind = cfg.channel;
    pc.channel.snr_db = job.snr;
    MetricsRow row;
    row.snr_db = job.snr;
    row.q = job.q;
    row.seed = cfg.base_seed + static_cast<std::uint64_t>(job.trial);
    double mse = 0, ssim = 0, cbr_sum = 0;
    int corrupted = 0;
    for (size_t i = 0; i < images.size(); ++i) {
      const auto res = transmit_image(images[i], pc, model, h, derive_seed(row.seed, i, 0x5eed));
      mse += mse_255(images[i], res.x_hat);
      ssim += ms_ssim(images[i], res.x_hat);
      cbr_sum += res.frame.cbr();
      corrupted += res.corrupted;
    }
    const double n = static_cast<double>(images.size());
    row.psnr_db = psnr_from_mse(mse / n);
    row.ms_ssim = ssim / n;
    row.cbr = cbr_sum / n;
    row.corruption_rate = corrupted / n;
    rows[j] = row;
  };

  int workers = cfg.threads > 0 ? cfg.threads : static_cast<int>(std::thread::hardware_concurrency());
  workers = std::max(1, std::min<int>(workers, static_cast<int>(jobs.size())));
  if (workers == 1) {
    for (size_t j = 0; j < jobs.size(); ++j) run_job(j);
    return rows;
  }
  std::atomic<size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (size_t j = next++; j < jobs.size(); j = next++) {
        try {
          run_job(j);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!error) error = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
  return rows;
}

std::string format_csv(const std::vector<MetricsRow>& rows) {
  std::string out = "snr_db,cbr,psnr_db,ms_ssim,corruption_rate,seed\n";
  for (const auto& r : rows) {
    out += fmt("%g", r.snr_db) + "," + fmt("%.6f", r.cbr) + ",";
    if (std::isfinite(r.psnr_db)) out += fmt("%.4f", r.psnr_db);
    out += "," + fmt("%.6f", r.ms_ssim) + "," + fmt("%.4f", r.corruption_rate) + "," + std::to_string(r.seed) + "\n";
  }
  return out;
}

std::string format_plot_data(const std::vector<MetricsRow>& rows, const std::string& metric) {
  // q -> snr -> (sum, count) of finite values, plus a count of infinite ones.
  std::map<int, std::map<double, std::pair<double, int>>> acc;
  std::map<int, std::map<double, int>> inf;
  for (const auto& r : rows) {
    const double v = metric_of(r, metric);
    auto& cell = acc[r.q][r.snr_db];
    if (std::isfinite(v)) {
      cell.first += v;
      ++cell.second;
    } else {
      ++inf[r.q][r.snr_db];
    }
  }
  std::string out = "# " + metric + " vs snr_db, mean over seeds; one block per quality factor\n";
  bool first = true;
  for (const auto& [q, by_snr] : acc) {
    if (!first) out += "\n\n";
    first = false;
    out += "# q=" + std::to_string(q) + "\n";
    for (const auto& [snr, cell] : by_snr) {
      out += fmt("%g", snr) + " ";
      out += cell.second ? fmt("%.6f", cell.first / cell.second) : std::string("inf");
      out += "\n";
    }
  }
  return out;
}

std::string run_experiment(const std::string& config_path, std::optional<int> trials_override) {
  auto cfg = SweepConfig::from(Config::load(config_path));
  if (trials_override) {
    if (*trials_override < 1) throw ConfigError("--trials must be >= 1", 0);
    cfg.seeds = *trials_override;
  }
  std::optional<SemanticModel> model;
  if (cfg.mode != SemanticMode::off) model = SemanticModel::load(cfg.checkpoint);
  const auto rows = run_sweep(cfg, sweep_images(cfg), model ? &*model : nullptr);

  std::filesystem::create_directories(cfg.output_dir);
  const auto base = std::filesystem::path(cfg.output_dir) / cfg.name;
  const std::string csv_path = base.string() + ".csv";
  std::ofstream(csv_path, std::ios::binary) << format_csv(rows);
  for (const auto& m : kPlotMetrics) {
    std::ofstream(base.string() + "_" + m + ".dat", std::ios::binary) << format_plot_data(rows, m);
  }
  return csv_path;
}

TrainPlan TrainPlan::from(const Config& c) {
  c.require_known(kTrainKeys);
  TrainPlan p;
  p.stage1_steps = static_cast<int>(c.get_int("train.stage1_steps", p.stage1_steps));
  p.stage2_steps = static_cast<int>(c.get_int("train.stage2_steps", p.stage2_steps));
  p.stage3_steps = static_cast<int>(c.get_int("train.stage3_steps", p.stage3_steps));
  auto& b = p.base;
  b.batch = static_cast<int>(c.get_int("train.batch", b.batch));
  b.lr = c.get_double("train.lr", b.lr);
  b.q = static_cast<int>(c.get_int("train.q", b.q));
  b.snr_choices = c.get_doubles("train.snr_db", b.snr_choices);
  b.channel = parse_channel_kind(c.get_string("train.channel", "awgn"));
  b.lambda1 = c.get_double("train.lambda1", b.lambda1);
  b.lambda2 = c.get_double("train.lambda2", b.lambda2);
  b.seed = static_cast<std::uint64_t>(c.get_int("train.seed", static_cast<long long>(b.seed)));
  b.flips = c.get_bool("train.flips", b.flips);
  b.crop = static_cast<int>(c.get_int("train.crop", b.crop));
  b.code = c.get_string("train.code", b.code);
  b.simulate_image_stream = c.get_bool("train.simulate_image_stream", b.simulate_image_stream);
  b.stream_dropout = c.get_double("train.stream_dropout", b.stream_dropout);
  p.output = c.get_string("train.output", p.output);
  p.model_seed = static_cast<std::uint64_t>(c.get_int("train.model_seed", static_cast<long long>(p.model_seed)));
  p.corpus_count = static_cast<int>(c.get_int("data.count", p.corpus_count));
  p.corpus_size = static_cast<int>(c.get_int("data.size", p.corpus_size));
  p.corpus_seed = static_cast<std::uint64_t>(c.get_int("data.seed", static_cast<long long>(p.corpus_seed)));
  return p;
}

}  // namespace pstx
