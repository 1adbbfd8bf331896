#pragma once

#include "pstx/config.hpp"
#include "pstx/pipeline.hpp"
#include "pstx/train.hpp"

#include <optional>
#include <string>
#include <vector>

namespace pstx {

struct MetricsRow {
  double snr_db = 0;
  int q = 0;
  double cbr = 0;
  double psnr_db = 0;  // +inf when every reconstruction is exact
  double ms_ssim = 0;
  double corruption_rate = 0;
  std::uint64_t seed = 0;
};

struct SweepConfig {
  std::string name = "sweep";
  std::string output_dir = "results";
  std::vector<double> snr_db{2, 4, 6, 8, 10, 12};
  std::vector<int> q{30};
  int seeds = 5;
  std::uint64_t base_seed = 1;
  ChannelKind channel = ChannelKind::awgn;
  SemanticMode mode = SemanticMode::off;
  std::string code = "desk";
  int max_iter = fec::kDefaultMaxIter;
  std::string checkpoint;  // required unless mode is off
  // Evaluation images: procedural corpus unless `images` lists PPM files.
  std::vector<std::string> images;
  int corpus_count = 4;
  int corpus_size = 16;
  std::uint64_t corpus_seed = 7;
  int threads = 0;  // 0 = hardware concurrency

  static SweepConfig from(const Config& cfg);
};

/// Evaluation images selected by a sweep config.
std::vector<Image> sweep_images(const SweepConfig& cfg);

/// One row per (snr, q, seed index), sorted in that order. Trials run on a
/// worker pool; results do not depend on the number of workers.
std::vector<MetricsRow> run_sweep(const SweepConfig& cfg, const std::vector<Image>& images,
                                  const SemanticModel* model);

/// CSV with header snr_db,cbr,psnr_db,ms_ssim,corruption_rate,seed (LF line
/// ends, infinite PSNR written as an empty cell).
std::string format_csv(const std::vector<MetricsRow>& rows);

/// Two-column gnuplot data (snr_db, mean over seeds) for one metric, one
/// index block per q.
std::string format_plot_data(const std::vector<MetricsRow>& rows, const std::string& metric);

inline const std::vector<std::string> kPlotMetrics{"cbr", "psnr_db", "ms_ssim", "corruption_rate"};

/// Parses the config file, runs the sweep and writes <name>.csv plus
/// <name>_<metric>.dat into the output directory. Returns the CSV path.
std::string run_experiment(const std::string& config_path, std::optional<int> trials_override = std::nullopt);

/// Training settings read from a [train] section.
struct TrainPlan {
  int stage1_steps = 200;
  int stage2_steps = 100;
  int stage3_steps = 100;
  TrainConfig base;
  int corpus_count = 32;
  int corpus_size = 16;
  std::uint64_t corpus_seed = 3;
  std::uint64_t model_seed = 11;
  std::string output = "model.ckpt";

  static TrainPlan from(const Config& cfg);
};

}  // namespace pstx
