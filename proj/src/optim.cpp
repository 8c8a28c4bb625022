#include "slukit/optim.hpp"

#include <cmath>

#include "slukit/error.hpp"

namespace slukit::ad {

void adam_step(std::span<double> params, std::span<const double> grads,
               AdamMoments& state, const AdamConfig& cfg, long step) {
  if (step < 1) throw ContractError("adam_step: step must be >= 1");
  if (grads.size() != params.size())
    throw ShapeError("adam_step: gradient size differs from parameter size");
  if (state.m.empty()) {
    state.m.assign(params.size(), 0.0);
    state.v.assign(params.size(), 0.0);
  }
  if (state.m.size() != params.size() || state.v.size() != params.size())
    throw ShapeError("adam_step: moment size differs from parameter size");

  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    state.m[i] = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * g;
    state.v[i] = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * g * g;
    const double m_hat = state.m[i] / bc1;
    const double v_hat = state.v[i] / bc2;
    params[i] -= cfg.learning_rate * m_hat / (std::sqrt(v_hat) + cfg.epsilon);
  }
}

Adam::Adam(std::vector<Tensor> params, AdamConfig cfg)
    : params_(std::move(params)), state_(params_.size()), cfg_(cfg) {
  for (const auto& p : params_)
    if (!p.requires_grad())
      throw ContractError("Adam: parameter does not require grad");
}

void Adam::step() {
  ++step_;
  for (std::size_t i = 0; i < params_.size(); ++i)
    adam_step(params_[i].mutable_values(), params_[i].grad(), state_[i], cfg_,
              step_);
}

void Adam::zero_grad() {
  for (auto& p : params_) p.zero_grad();
}

}  // namespace slukit::ad
