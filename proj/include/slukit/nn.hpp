#pragma once

// Parameterized building blocks shared by encoders and decoders.

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string>

#include "slukit/ops.hpp"

namespace slukit::nn {

using ad::Tensor;
using ad::NamedParams;

enum class Mode { kTrain, kEval };

// Xavier-uniform [in×out].
Tensor xavier(std::size_t in, std::size_t out, std::mt19937_64& rng);
// uniform(-bound, bound)
Tensor uniform(ad::Shape shape, double bound, std::mt19937_64& rng);

// uniform(±1/√H) recurrent weights, Xavier input projection, forget bias 1.
ad::LstmParams make_lstm(std::size_t input_size, std::size_t hidden_size,
                         std::mt19937_64& rng);

class Linear {
 public:
  Linear() = default;
  Linear(std::size_t in, std::size_t out, std::mt19937_64& rng);

  // x [...×in] -> [...×out]
  Tensor operator()(const Tensor& x) const;
  std::size_t in() const { return weight_.dim(0); }
  std::size_t out() const { return weight_.dim(1); }
  NamedParams params() const;

  Tensor& weight() { return weight_; }
  Tensor& bias() { return bias_; }

 private:
  Tensor weight_;
  Tensor bias_;
};

// Row lookup into a [V×d] table; id 0 (PAD) reads as zeros.
class Embedding {
 public:
  Embedding() = default;
  explicit Embedding(Tensor table) : table_(std::move(table)) {}

  // ids are [B×T] row-major; result [B×T×d].
  Tensor operator()(std::span<const int> ids, std::size_t batch, std::size_t steps) const;
  std::size_t vocab_size() const { return table_.dim(0); }
  std::size_t dim() const { return table_.dim(1); }
  NamedParams params() const { return {{"table", table_}}; }

 private:
  Tensor table_;
};

// Multiplies `x` [B×T×H] through rank-2 ops as [(B·T)×H].
Tensor flatten_steps(const Tensor& x);
Tensor unflatten_steps(const Tensor& x, std::size_t batch, std::size_t steps);

// [B×K] -> [B×T×K] by repeating each row T times.
Tensor repeat_steps(const Tensor& x, std::size_t steps);

// Index of the largest value in each row of a rank-2 or rank-3 tensor.
std::vector<int> argmax_rows(const Tensor& x);

}  // namespace slukit::nn
