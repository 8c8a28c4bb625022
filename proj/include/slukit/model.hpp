#pragma once

#include <memory>
#include <random>
#include <string_view>
#include <vector>

#include "slukit/batch.hpp"
#include "slukit/decoders.hpp"
#include "slukit/encoders.hpp"

namespace slukit::nn {

// sentence: one intent from the masked mean of the intent stream.
// token: an intent per token, resolved by token_intent_vote.
// multi: per-intent logistic scores decoded with a threshold.
enum class IntentMode { kSentence, kToken, kMulti };
IntentMode parse_intent_mode(std::string_view name);
std::string_view intent_mode_name(IntentMode mode);

struct LossWeights {
  double intent = 1.0;
  double slot = 1.0;
};

struct Prediction {
  std::vector<int> intents;  // one id unless multi mode
  std::vector<int> slots;    // one id per real token
};

class JointModel {
 public:
  struct Parts {
    Embedding embedding;
    double dropout = 0.0;
    std::unique_ptr<Encoder> encoder;
    std::unique_ptr<Interaction> interaction;
    std::unique_ptr<Classifier> intent_classifier;
    std::unique_ptr<Classifier> slot_classifier;
    IntentMode intent_mode = IntentMode::kSentence;
    double threshold = 0.5;
  };

  explicit JointModel(Parts parts);

  // `rng` drives dropout in training mode and may be null in eval mode.
  OutputData forward(const data::Batch& batch, Mode mode, std::mt19937_64* rng) const;
  ad::Tensor loss(const data::Batch& batch, const OutputData& out,
                  const LossWeights& weights) const;
  std::vector<Prediction> decode(const data::Batch& batch, const OutputData& out) const;
  std::vector<Prediction> predict(const data::Batch& batch) const;

  NamedParams params() const;
  IntentMode intent_mode() const { return parts_.intent_mode; }
  double threshold() const { return parts_.threshold; }
  const Parts& parts() const { return parts_; }

 private:
  Tensor classify_intent(const HiddenData& h, const data::Batch& batch, Mode mode) const;
  std::vector<int> token_intent_targets(const data::Batch& batch) const;

  Parts parts_;
};

}  // namespace slukit::nn
