#pragma once

#include "pstx/tensor.hpp"

#include <vector>

namespace pstx {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Adam with bias correction. Parameters without a gradient are skipped.
class Adam {
 public:
  explicit Adam(std::vector<Tensor> params, AdamConfig config = {});

  void step(double lr);
  void zero_grad();
  long steps() const { return step_; }

 private:
  std::vector<Tensor> params_;
  std::vector<Eigen::VectorXd> m_;
  std::vector<Eigen::VectorXd> v_;
  AdamConfig config_;
  long step_ = 0;
};

/// lr(t) = base * (1 - t/total)^power, clamped to 0 at and beyond `total`.
double poly_lr(double base, long step, long total, double power = 0.9);

}  // namespace pstx
