#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "slukit/nn.hpp"

namespace slukit::nn {

inline constexpr const char* kIntentTokenProbs = "intent_token_probs";

struct HiddenData {
  Tensor intent_hidden;  // [B×T×H_i]
  Tensor slot_hidden;    // [B×T×H_s]
  ad::Mask mask;         // [B×T]
  std::map<std::string, Tensor> aux;

  std::size_t batch() const { return slot_hidden.dim(0); }
  std::size_t steps() const { return slot_hidden.dim(1); }
};

struct OutputData {
  Tensor intent_logits;  // [B×K] or [B×T×K] for token-level intent
  Tensor slot_logits;    // [B×T×K_slot]
};

// --- interactions ---------------------------------------------------------

class Interaction {
 public:
  virtual ~Interaction() = default;
  virtual HiddenData apply(const HiddenData& h) const = 0;
  // Single flow consumes token-level intent probabilities from `aux`.
  virtual bool needs_intent_probs() const { return false; }
  virtual NamedParams params() const { return {}; }
};

class IdentityInteraction : public Interaction {
 public:
  HiddenData apply(const HiddenData& h) const override { return h; }
};

// slot' = Linear([slot ; softmax(token intent logits)]) back to H_s.
class SingleFlowInteraction : public Interaction {
 public:
  SingleFlowInteraction(std::size_t slot_width, std::size_t num_intents,
                        std::mt19937_64& rng);
  HiddenData apply(const HiddenData& h) const override;
  bool needs_intent_probs() const override { return true; }
  NamedParams params() const override { return proj_.params(); }
  Linear& projection() { return proj_; }

 private:
  Linear proj_;
};

// g = Σ v ⊙ tanh(c_slot + c_intent·W), one scalar per utterance, where the
// contexts are masked means of each stream. slot' = slot + g·slot.
class SlotGatedInteraction : public Interaction {
 public:
  SlotGatedInteraction(std::size_t intent_width, std::size_t slot_width,
                       std::mt19937_64& rng);
  HiddenData apply(const HiddenData& h) const override;
  NamedParams params() const override;
  // [B] gate values for `h`.
  Tensor gate(const HiddenData& h) const;
  Tensor& w() { return w_; }
  Tensor& v() { return v_; }

 private:
  Tensor w_;  // [H_i×H_s]
  Tensor v_;  // [H_s×1]
};

// Each stream attends over the other (queries from itself, keys and values
// from the other) and adds the result back.
class BidirectionalInteraction : public Interaction {
 public:
  struct Block {
    Linear query, key, value;
  };
  BidirectionalInteraction(std::size_t width, std::size_t attention_size,
                           std::mt19937_64& rng);
  BidirectionalInteraction(Block intent_block, Block slot_block);
  HiddenData apply(const HiddenData& h) const override;
  NamedParams params() const override;
  Block& intent_block() { return intent_; }
  Block& slot_block() { return slot_; }

 private:
  Block intent_;  // updates the intent stream
  Block slot_;    // updates the slot stream
};

// --- classifiers ----------------------------------------------------------

enum class DecodeMode { kTeacherForced, kAutoregressive };

struct ClassifyInput {
  Tensor hidden;       // [B×T×H] or [B×H]
  const ad::Mask* mask = nullptr;
  DecodeMode mode = DecodeMode::kAutoregressive;
  // [B×T] gold ids for teacher forcing; kIgnoreIndex entries act as the
  // start symbol.
  std::optional<std::span<const int>> gold;
};

class Classifier {
 public:
  virtual ~Classifier() = default;
  virtual Tensor classify(const ClassifyInput& in) const = 0;
  virtual bool needs_sequence() const { return false; }
  virtual std::size_t input_width() const = 0;
  virtual std::size_t num_labels() const = 0;
  virtual NamedParams params() const = 0;
};

// Two-layer perceptron applied to every position independently.
class MlpClassifier : public Classifier {
 public:
  MlpClassifier(std::size_t input, std::size_t hidden, std::size_t labels,
                ad::Activation act, std::mt19937_64& rng);
  Tensor classify(const ClassifyInput& in) const override;
  std::size_t input_width() const override { return l1_.in(); }
  std::size_t num_labels() const override { return l2_.out(); }
  NamedParams params() const override;
  Linear& first() { return l1_; }
  Linear& second() { return l2_; }

 private:
  Linear l1_, l2_;
  ad::Activation act_;
};

// Left-to-right LSTM over [hidden_t ; embed(label_{t-1})]. Row K of the
// label table is the start symbol.
class LstmClassifier : public Classifier {
 public:
  LstmClassifier(std::size_t input, std::size_t hidden, std::size_t labels,
                 std::size_t label_dim, std::mt19937_64& rng);
  Tensor classify(const ClassifyInput& in) const override;
  bool needs_sequence() const override { return true; }
  std::size_t input_width() const override { return input_; }
  std::size_t num_labels() const override { return out_.out(); }
  NamedParams params() const override;

 private:
  std::size_t input_;
  Tensor label_table_;  // [(K+1)×label_dim]
  ad::LstmParams lstm_;
  Linear out_;
};

// --- decoding -------------------------------------------------------------

// Majority vote of per-token argmaxes over unmasked positions. Ties go to
// the higher mean softmax probability, then the lower id.
std::vector<int> token_intent_vote(const Tensor& token_logits, const ad::Mask& mask);

// {k : σ(score_k) > τ}, or the argmax when that set is empty.
std::vector<std::vector<int>> decode_multi_intent(const Tensor& scores, double tau);

}  // namespace slukit::nn
