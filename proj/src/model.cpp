#include "slukit/model.hpp"

#include "slukit/error.hpp"

namespace slukit::nn {

IntentMode parse_intent_mode(std::string_view name) {
  if (name == "sentence") return IntentMode::kSentence;
  if (name == "token") return IntentMode::kToken;
  if (name == "multi") return IntentMode::kMulti;
  throw ContractError("unknown intent mode '" + std::string(name) +
                      "' (expected sentence, token or multi)");
}

std::string_view intent_mode_name(IntentMode mode) {
  switch (mode) {
    case IntentMode::kSentence: return "sentence";
    case IntentMode::kToken: return "token";
    case IntentMode::kMulti: return "multi";
  }
  return "?";
}

JointModel::JointModel(Parts parts) : parts_(std::move(parts)) {
  if (!parts_.encoder || !parts_.interaction || !parts_.intent_classifier ||
      !parts_.slot_classifier)
    throw AssemblyError("joint model: every component must be present");
}

std::vector<int> JointModel::token_intent_targets(const data::Batch& batch) const {
  std::vector<int> out(batch.batch_size * batch.max_len, data::kIgnoreIndex);
  for (std::size_t b = 0; b < batch.batch_size; ++b)
    for (std::size_t t = 0; t < batch.lengths[b]; ++t)
      out[b * batch.max_len + t] = batch.intent_ids[b];
  return out;
}

Tensor JointModel::classify_intent(const HiddenData& h, const data::Batch& batch,
                                   Mode mode) const {
  ClassifyInput in;
  in.mask = &h.mask;
  if (parts_.intent_mode == IntentMode::kToken) {
    in.hidden = h.intent_hidden;
    if (mode == Mode::kTrain) {
      in.mode = DecodeMode::kTeacherForced;
      const auto gold = token_intent_targets(batch);
      in.gold = std::span<const int>(gold);
      return parts_.intent_classifier->classify(in);
    }
  } else {
    in.hidden = ad::mean_pool(h.intent_hidden, h.mask);
  }
  return parts_.intent_classifier->classify(in);
}

OutputData JointModel::forward(const data::Batch& batch, Mode mode,
                               std::mt19937_64* rng) const {
  Tensor emb = parts_.embedding(batch.token_ids, batch.batch_size, batch.max_len);
  if (mode == Mode::kTrain && parts_.dropout > 0.0) {
    if (!rng) throw ContractError("training forward needs a dropout generator");
    emb = ad::dropout(emb, parts_.dropout, *rng);
  }
  const auto enc = parts_.encoder->encode(emb, batch.mask, batch.lengths);
  HiddenData h{enc.hidden, enc.hidden, batch.mask, {}};

  OutputData out;
  if (parts_.interaction->needs_intent_probs()) {
    out.intent_logits = classify_intent(h, batch, mode);
    Tensor probs = parts_.intent_mode == IntentMode::kMulti
                       ? ad::sigmoid(out.intent_logits)
                       : ad::softmax_rows(out.intent_logits);
    if (probs.rank() == 2) probs = repeat_steps(probs, batch.max_len);
    h.aux[kIntentTokenProbs] = probs;
    h = parts_.interaction->apply(h);
  } else {
    h = parts_.interaction->apply(h);
    out.intent_logits = classify_intent(h, batch, mode);
  }

  ClassifyInput slot_in;
  slot_in.hidden = h.slot_hidden;
  slot_in.mask = &h.mask;
  if (mode == Mode::kTrain) {
    slot_in.mode = DecodeMode::kTeacherForced;
    slot_in.gold = std::span<const int>(batch.slot_ids);
  }
  out.slot_logits = parts_.slot_classifier->classify(slot_in);
  return out;
}

Tensor JointModel::loss(const data::Batch& batch, const OutputData& out,
                        const LossWeights& weights) const {
  std::vector<Tensor> terms;
  if (weights.slot > 0.0) {
    const Tensor slot = ad::softmax_cross_entropy(flatten_steps(out.slot_logits),
                                                  batch.slot_ids, data::kIgnoreIndex);
    terms.push_back(ad::scale(slot, weights.slot));
  }
  if (weights.intent > 0.0) {
    Tensor intent;
    switch (parts_.intent_mode) {
      case IntentMode::kSentence:
        intent = ad::softmax_cross_entropy(out.intent_logits, batch.intent_ids,
                                           data::kIgnoreIndex);
        break;
      case IntentMode::kToken: {
        const auto targets = token_intent_targets(batch);
        intent = ad::softmax_cross_entropy(flatten_steps(out.intent_logits), targets,
                                           data::kIgnoreIndex);
        break;
      }
      case IntentMode::kMulti:
        intent = ad::binary_cross_entropy_with_logits(out.intent_logits,
                                                      batch.intent_multi_hot);
        break;
    }
    terms.push_back(ad::scale(intent, weights.intent));
  }
  if (terms.empty()) throw ContractError("loss weights are both zero");
  return terms.size() == 1 ? terms[0] : ad::add(terms[0], terms[1]);
}

std::vector<Prediction> JointModel::decode(const data::Batch& batch,
                                           const OutputData& out) const {
  std::vector<Prediction> preds(batch.batch_size);
  const auto slot_ids = argmax_rows(out.slot_logits);
  for (std::size_t b = 0; b < batch.batch_size; ++b)
    preds[b].slots.assign(slot_ids.begin() + static_cast<std::ptrdiff_t>(b * batch.max_len),
                          slot_ids.begin() + static_cast<std::ptrdiff_t>(b * batch.max_len +
                                                                         batch.lengths[b]));
  switch (parts_.intent_mode) {
    case IntentMode::kSentence: {
      const auto ids = argmax_rows(out.intent_logits);
      for (std::size_t b = 0; b < batch.batch_size; ++b) preds[b].intents = {ids[b]};
      break;
    }
    case IntentMode::kToken: {
      const auto ids = token_intent_vote(out.intent_logits, batch.mask);
      for (std::size_t b = 0; b < batch.batch_size; ++b) preds[b].intents = {ids[b]};
      break;
    }
    case IntentMode::kMulti: {
      auto sets = decode_multi_intent(out.intent_logits, parts_.threshold);
      for (std::size_t b = 0; b < batch.batch_size; ++b) preds[b].intents = std::move(sets[b]);
      break;
    }
  }
  return preds;
}

std::vector<Prediction> JointModel::predict(const data::Batch& batch) const {
  ad::NoGradGuard guard;
  return decode(batch, forward(batch, Mode::kEval, nullptr));
}

NamedParams JointModel::params() const {
  NamedParams out;
  ad::append_params(out, "embedding.", parts_.embedding.params());
  ad::append_params(out, "encoder.", parts_.encoder->params());
  ad::append_params(out, "interaction.", parts_.interaction->params());
  ad::append_params(out, "intent_classifier.", parts_.intent_classifier->params());
  ad::append_params(out, "slot_classifier.", parts_.slot_classifier->params());
  return out;
}

}  // namespace slukit::nn
