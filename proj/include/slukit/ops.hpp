#pragma once

// Differentiable operations over `ad::Tensor`.
//
// Shapes are strict: the only broadcast is a bias vector added to every row.
// Ops that talk about "rows" flatten all leading dimensions and treat the
// last dimension as the row width.

#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string_view>
#include <vector>

#include "slukit/tensor.hpp"

namespace slukit::ad {

using Mask = std::vector<std::uint8_t>;

enum class Activation { kTanh, kSigmoid, kRelu };
Activation parse_activation(std::string_view name);
std::string_view activation_name(Activation kind);

// Additive value used to exclude masked attention columns.
inline constexpr double kMaskedScore = -1e9;

Tensor matmul(const Tensor& a, const Tensor& b);     // [m×k]·[k×n]
Tensor matmul_nt(const Tensor& a, const Tensor& b);  // [m×k]·[n×k]ᵀ
Tensor transpose(const Tensor& x);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& x, double factor);
// x[..., n] + bias[n] on every row.
Tensor add_bias(const Tensor& x, const Tensor& bias);

Tensor apply_activation(const Tensor& x, Activation kind);
Tensor tanh(const Tensor& x);
Tensor sigmoid(const Tensor& x);
Tensor relu(const Tensor& x);

// Softmax over the last dimension.
Tensor softmax_rows(const Tensor& x);

// Mean of -log softmax(logits)[target] over rows whose target is not
// `ignore_index`. Throws DegenerateError if every row is ignored.
Tensor softmax_cross_entropy(const Tensor& logits, std::span<const int> targets,
                             std::optional<int> ignore_index = std::nullopt);

// Mean over all cells of the logistic loss, in the log-sum-exp safe form.
Tensor binary_cross_entropy_with_logits(const Tensor& logits,
                                        std::span<const double> targets);

Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);
Tensor reshape(const Tensor& x, Shape shape);

Tensor concat_last(std::span<const Tensor> parts);
Tensor slice_last(const Tensor& x, std::size_t begin, std::size_t end);
// Rank-2 row concatenation / slicing.
Tensor concat_rows(std::span<const Tensor> parts);
Tensor slice_rows(const Tensor& x, std::size_t begin, std::size_t end);

// out[i] = table[ids[i]]. Rows whose id equals `padding_id` are zero and
// receive no gradient.
Tensor gather_rows(const Tensor& table, std::span<const int> ids,
                   std::optional<int> padding_id = std::nullopt);

// Row r of the result is a[r] where take_a[r] != 0, else b[r].
Tensor select_rows(std::span<const std::uint8_t> take_a, const Tensor& a,
                   const Tensor& b);

// Scales each row by a constant weight.
Tensor mul_rows(const Tensor& x, std::span<const double> weights);

// x is viewed as [G × M] with G = numel(factors); each group is multiplied
// by its factor. Differentiable in both arguments.
Tensor scale_groups(const Tensor& x, const Tensor& factors);

// T tensors of [B×H] -> [B×T×H].
Tensor stack_steps(std::span<const Tensor> steps);

// Mean over unmasked positions: [B×T×H] -> [B×H].
Tensor mean_pool(const Tensor& x, std::span<const std::uint8_t> mask);

// Inverted dropout; identity when p == 0.
Tensor dropout(const Tensor& x, double p, std::mt19937_64& rng);

// scores[Tq×Tk] + kMaskedScore on every column j with mask[j] == 0.
Tensor mask_columns(const Tensor& scores, std::span<const std::uint8_t> mask);

// softmax(q·kᵀ/√d) with masked keys excluded.
Tensor attention_weights(const Tensor& q, const Tensor& k,
                         std::span<const std::uint8_t> mask);
Tensor scaled_dot_attention(const Tensor& q, const Tensor& k, const Tensor& v,
                            std::span<const std::uint8_t> mask);

// Batched form: q [B×Tq×d], k [B×Tk×d], v [B×Tk×dv], mask [B×Tk].
// Each utterance attends only within itself, so results do not depend on
// which other rows share the batch.
Tensor batched_attention(const Tensor& q, const Tensor& k, const Tensor& v,
                         std::span<const std::uint8_t> mask);

struct LstmParams {
  Tensor w_x;   // [H_in × 4H], gate blocks ordered input, forget, cell, output
  Tensor w_h;   // [H × 4H]
  Tensor bias;  // [4H]
  std::size_t input_size() const { return w_x.dim(0); }
  std::size_t hidden_size() const { return w_h.dim(0); }
  NamedParams named() const;
};

struct LstmState {
  Tensor h;  // [B×H]
  Tensor c;  // [B×H]
};

// One LSTM step on a batch of rows.
LstmState lstm_cell(const Tensor& x, const Tensor& h, const Tensor& c,
                    const LstmParams& params);
// Same step with the input projection x·W_x already computed (lets a caller
// project a whole sequence in one GEMM).
LstmState lstm_cell_preact(const Tensor& x_proj, const Tensor& h,
                           const Tensor& c, const LstmParams& params);

}  // namespace slukit::ad
