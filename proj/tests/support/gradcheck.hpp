#pragma once

// Central finite-difference oracle. It only ever calls the forward function
// on perturbed copies of the inputs, so it shares no code with backward().

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "slukit/ops.hpp"
#include "slukit/tensor.hpp"

namespace slukit::testing {

using ad::Tensor;
using LossFn = std::function<Tensor(const std::vector<Tensor>&)>;

struct GradCheckReport {
  double max_relative_error = 0.0;
  std::size_t worst_input = 0;
};

// Relative error between two gradient vectors: ‖a−n‖₂ / max(‖a‖₂, ‖n‖₂).
// When both norms are below kVanishing the absolute error is returned
// instead; central differences at step 1e-5 carry ~1e-11 of rounding noise,
// so a relative comparison of two vanishing gradients is meaningless.
inline constexpr double kVanishing = 1e-7;

inline double relative_error(const std::vector<double>& analytic,
                             const std::vector<double>& numeric) {
  double diff = 0.0, na = 0.0, nn = 0.0;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    diff += (analytic[i] - numeric[i]) * (analytic[i] - numeric[i]);
    na += analytic[i] * analytic[i];
    nn += numeric[i] * numeric[i];
  }
  const double denom = std::max(std::sqrt(na), std::sqrt(nn));
  if (denom < kVanishing) return std::sqrt(diff);
  return std::sqrt(diff) / denom;
}

inline std::vector<double> numeric_gradient(const LossFn& f,
                                            const std::vector<Tensor>& inputs,
                                            std::size_t which,
                                            double step = 1e-5) {
  ad::NoGradGuard no_grad;
  Tensor target = inputs[which];
  auto values = target.mutable_values();
  std::vector<double> out(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double orig = values[i];
    values[i] = orig + step;
    const double up = f(inputs).item();
    values[i] = orig - step;
    const double down = f(inputs).item();
    values[i] = orig;
    out[i] = (up - down) / (2.0 * step);
  }
  return out;
}

inline GradCheckReport gradcheck(const LossFn& f, std::vector<Tensor> inputs,
                                 double step = 1e-5) {
  for (auto& t : inputs) t.zero_grad();
  ad::backward(f(inputs));
  GradCheckReport report;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    if (!inputs[k].requires_grad()) continue;
    std::vector<double> analytic(inputs[k].grad().begin(),
                                 inputs[k].grad().end());
    const double err =
        relative_error(analytic, numeric_gradient(f, inputs, k, step));
    if (err > report.max_relative_error) {
      report.max_relative_error = err;
      report.worst_input = k;
    }
  }
  return report;
}

inline Tensor random_tensor(ad::Shape shape, std::mt19937_64& rng,
                            double lo = -1.0, double hi = 1.0,
                            bool requires_grad = true) {
  std::uniform_real_distribution<double> uni(lo, hi);
  std::vector<double> v(ad::numel(shape));
  for (double& x : v) x = uni(rng);
  return Tensor::from(std::move(shape), std::move(v), requires_grad);
}

// Fixed random projection so the checked loss is not a symmetric sum.
inline Tensor weighted_sum(const Tensor& x, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Tensor w = random_tensor(x.shape(), rng, -1.0, 1.0, false);
  return ad::sum(ad::mul(x, w));
}

}  // namespace slukit::testing
