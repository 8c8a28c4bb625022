#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "slukit/tensor.hpp"

namespace slukit::ad {

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// First and second moment estimates for one parameter tensor.
struct AdamMoments {
  std::vector<double> m;
  std::vector<double> v;
};

// One bias-corrected Adam update of `params` in place. `step` is the
// 1-based update count.
void adam_step(std::span<double> params, std::span<const double> grads,
               AdamMoments& state, const AdamConfig& cfg, long step);

class Adam {
 public:
  Adam(std::vector<Tensor> params, AdamConfig cfg);

  void step();
  void zero_grad();
  long steps_taken() const { return step_; }
  const AdamConfig& config() const { return cfg_; }
  const std::vector<AdamMoments>& moments() const { return state_; }

 private:
  std::vector<Tensor> params_;
  std::vector<AdamMoments> state_;
  AdamConfig cfg_;
  long step_ = 0;
};

}  // namespace slukit::ad
