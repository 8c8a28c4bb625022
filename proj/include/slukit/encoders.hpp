#pragma once

#include <cstddef>
#include <memory>
#include <random>
#include <span>
#include <string>

#include "slukit/nn.hpp"

namespace slukit::nn {

struct EncoderOutput {
  Tensor hidden;  // [B×T×H_enc]
  ad::Mask mask;  // [B×T]
};

class Encoder {
 public:
  virtual ~Encoder() = default;
  // emb [B×T×d]; lengths[b] leading positions of row b are real tokens.
  virtual EncoderOutput encode(const Tensor& emb, const ad::Mask& mask,
                               std::span<const std::size_t> lengths) const = 0;
  virtual std::size_t input_width() const = 0;
  virtual std::size_t output_width() const = 0;
  virtual NamedParams params() const = 0;
};

// Mask from lengths: row b has lengths[b] leading ones out of `steps`.
ad::Mask mask_from_lengths(std::span<const std::size_t> lengths, std::size_t steps);

class BiLstmEncoder : public Encoder {
 public:
  BiLstmEncoder(std::size_t input_size, std::size_t hidden_size, std::mt19937_64& rng);
  BiLstmEncoder(ad::LstmParams forward, ad::LstmParams backward);

  EncoderOutput encode(const Tensor& emb, const ad::Mask& mask,
                       std::span<const std::size_t> lengths) const override;
  std::size_t input_width() const override { return fwd_.input_size(); }
  std::size_t output_width() const override { return 2 * fwd_.hidden_size(); }
  NamedParams params() const override;

  const ad::LstmParams& forward_params() const { return fwd_; }
  const ad::LstmParams& backward_params() const { return bwd_; }

 private:
  ad::LstmParams fwd_;
  ad::LstmParams bwd_;
};

// concat(BiLSTM(emb), Attention(emb)) with query/key/value projections of
// width d_attn. Output width 2H + d_attn.
class SelfAttentiveEncoder : public Encoder {
 public:
  SelfAttentiveEncoder(std::size_t input_size, std::size_t hidden_size,
                       std::size_t attention_size, std::mt19937_64& rng);

  EncoderOutput encode(const Tensor& emb, const ad::Mask& mask,
                       std::span<const std::size_t> lengths) const override;
  std::size_t input_width() const override { return lstm_.input_width(); }
  std::size_t output_width() const override {
    return lstm_.output_width() + value_.out();
  }
  NamedParams params() const override;

  Linear& query() { return query_; }
  Linear& key() { return key_; }
  Linear& value() { return value_; }

 private:
  BiLstmEncoder lstm_;
  Linear query_, key_, value_;
};

// One direction of a masked LSTM over [B×T×d]. Rows only advance while
// t < lengths[b]; outputs past the length are zero.
Tensor run_lstm(const Tensor& emb, std::span<const std::size_t> lengths,
                const ad::LstmParams& p, bool reverse);

}  // namespace slukit::nn
