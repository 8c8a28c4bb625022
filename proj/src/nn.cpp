#include "slukit/nn.hpp"

#include <algorithm>
#include <cmath>

#include "slukit/error.hpp"

namespace slukit::nn {

Tensor uniform(ad::Shape shape, double bound, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-bound, bound);
  std::vector<double> v(ad::numel(shape));
  for (double& x : v) x = u(rng);
  return Tensor::from(std::move(shape), std::move(v), true);
}

Tensor xavier(std::size_t in, std::size_t out, std::mt19937_64& rng) {
  return uniform({in, out}, std::sqrt(6.0 / static_cast<double>(in + out)), rng);
}

ad::LstmParams make_lstm(std::size_t input_size, std::size_t hidden_size,
                         std::mt19937_64& rng) {
  ad::LstmParams p;
  p.w_x = xavier(input_size, 4 * hidden_size, rng);
  p.w_h = uniform({hidden_size, 4 * hidden_size},
                  1.0 / std::sqrt(static_cast<double>(hidden_size)), rng);
  std::vector<double> bias(4 * hidden_size, 0.0);
  std::fill(bias.begin() + static_cast<std::ptrdiff_t>(hidden_size),
            bias.begin() + static_cast<std::ptrdiff_t>(2 * hidden_size), 1.0);
  p.bias = Tensor::from({4 * hidden_size}, std::move(bias), true);
  return p;
}

Linear::Linear(std::size_t in, std::size_t out, std::mt19937_64& rng)
    : weight_(xavier(in, out, rng)), bias_(Tensor::zeros({out}, true)) {}

Tensor Linear::operator()(const Tensor& x) const {
  if (x.shape().back() != in())
    throw ShapeError("linear: input " + ad::to_string(x.shape()) + " for weight " +
                     ad::to_string(weight_.shape()));
  if (x.rank() == 2) return ad::add_bias(ad::matmul(x, weight_), bias_);
  ad::Shape out_shape = x.shape();
  out_shape.back() = out();
  const Tensor flat = ad::reshape(x, {x.size() / in(), in()});
  return ad::reshape(ad::add_bias(ad::matmul(flat, weight_), bias_), out_shape);
}

NamedParams Linear::params() const { return {{"weight", weight_}, {"bias", bias_}}; }

Tensor Embedding::operator()(std::span<const int> ids, std::size_t batch,
                             std::size_t steps) const {
  if (ids.size() != batch * steps)
    throw ShapeError("embedding: " + std::to_string(ids.size()) + " ids for " +
                     std::to_string(batch) + "x" + std::to_string(steps));
  return ad::reshape(ad::gather_rows(table_, ids, 0), {batch, steps, dim()});
}

Tensor flatten_steps(const Tensor& x) {
  if (x.rank() != 3) throw ShapeError("expected [B×T×H], got " + ad::to_string(x.shape()));
  return ad::reshape(x, {x.dim(0) * x.dim(1), x.dim(2)});
}

Tensor unflatten_steps(const Tensor& x, std::size_t batch, std::size_t steps) {
  return ad::reshape(x, {batch, steps, x.shape().back()});
}

Tensor repeat_steps(const Tensor& x, std::size_t steps) {
  if (x.rank() != 2) throw ShapeError("repeat_steps: expected [B×K], got " + ad::to_string(x.shape()));
  const std::size_t batch = x.dim(0);
  std::vector<int> ids(batch * steps);
  for (std::size_t b = 0; b < batch; ++b)
    std::fill_n(ids.begin() + static_cast<std::ptrdiff_t>(b * steps), steps, static_cast<int>(b));
  return ad::reshape(ad::gather_rows(x, ids), {batch, steps, x.dim(1)});
}

std::vector<int> argmax_rows(const Tensor& x) {
  const std::size_t k = x.shape().back();
  const std::size_t rows = x.size() / k;
  auto v = x.values();
  std::vector<int> out(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* row = v.data() + r * k;
    out[r] = static_cast<int>(std::max_element(row, row + k) - row);
  }
  return out;
}

}  // namespace slukit::nn
