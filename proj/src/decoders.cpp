#include "slukit/decoders.hpp"

#include <algorithm>
#include <cmath>

#include "slukit/error.hpp"
#include "slukit/vocab.hpp"

namespace slukit::nn {

namespace {

void require_sequence(const Tensor& x, const char* who) {
  if (x.rank() != 3)
    throw ShapeError(std::string(who) + ": expected [B×T×H], got " +
                     ad::to_string(x.shape()));
}

}  // namespace

SingleFlowInteraction::SingleFlowInteraction(std::size_t slot_width,
                                             std::size_t num_intents,
                                             std::mt19937_64& rng)
    : proj_(slot_width + num_intents, slot_width, rng) {}

HiddenData SingleFlowInteraction::apply(const HiddenData& h) const {
  const auto it = h.aux.find(kIntentTokenProbs);
  if (it == h.aux.end())
    throw ContractError("single_flow: token-level intent distribution missing from aux");
  const Tensor parts[] = {h.slot_hidden, it->second};
  HiddenData out = h;
  out.slot_hidden = proj_(ad::concat_last(parts));
  return out;
}

SlotGatedInteraction::SlotGatedInteraction(std::size_t intent_width,
                                           std::size_t slot_width,
                                           std::mt19937_64& rng)
    : w_(xavier(intent_width, slot_width, rng)), v_(xavier(slot_width, 1, rng)) {}

Tensor SlotGatedInteraction::gate(const HiddenData& h) const {
  const Tensor c_slot = ad::mean_pool(h.slot_hidden, h.mask);
  const Tensor c_intent = ad::mean_pool(h.intent_hidden, h.mask);
  const Tensor z = ad::tanh(ad::add(c_slot, ad::matmul(c_intent, w_)));
  return ad::reshape(ad::matmul(z, v_), {h.batch()});
}

HiddenData SlotGatedInteraction::apply(const HiddenData& h) const {
  HiddenData out = h;
  out.slot_hidden = ad::add(h.slot_hidden, ad::scale_groups(h.slot_hidden, gate(h)));
  return out;
}

NamedParams SlotGatedInteraction::params() const { return {{"w", w_}, {"v", v_}}; }

BidirectionalInteraction::BidirectionalInteraction(std::size_t width,
                                                   std::size_t attention_size,
                                                   std::mt19937_64& rng)
    : intent_{Linear(width, attention_size, rng), Linear(width, attention_size, rng),
              Linear(width, width, rng)},
      slot_{Linear(width, attention_size, rng), Linear(width, attention_size, rng),
            Linear(width, width, rng)} {}

BidirectionalInteraction::BidirectionalInteraction(Block intent_block, Block slot_block)
    : intent_(std::move(intent_block)), slot_(std::move(slot_block)) {}

HiddenData BidirectionalInteraction::apply(const HiddenData& h) const {
  if (h.intent_hidden.shape() != h.slot_hidden.shape())
    throw ShapeError("bidirectional: stream shapes " + ad::to_string(h.intent_hidden.shape()) +
                     " and " + ad::to_string(h.slot_hidden.shape()) + " differ");
  HiddenData out = h;
  out.intent_hidden = ad::add(
      h.intent_hidden,
      ad::batched_attention(intent_.query(h.intent_hidden), intent_.key(h.slot_hidden),
                            intent_.value(h.slot_hidden), h.mask));
  out.slot_hidden = ad::add(
      h.slot_hidden,
      ad::batched_attention(slot_.query(h.slot_hidden), slot_.key(h.intent_hidden),
                            slot_.value(h.intent_hidden), h.mask));
  return out;
}

NamedParams BidirectionalInteraction::params() const {
  NamedParams out;
  ad::append_params(out, "intent.query.", intent_.query.params());
  ad::append_params(out, "intent.key.", intent_.key.params());
  ad::append_params(out, "intent.value.", intent_.value.params());
  ad::append_params(out, "slot.query.", slot_.query.params());
  ad::append_params(out, "slot.key.", slot_.key.params());
  ad::append_params(out, "slot.value.", slot_.value.params());
  return out;
}

MlpClassifier::MlpClassifier(std::size_t input, std::size_t hidden, std::size_t labels,
                             ad::Activation act, std::mt19937_64& rng)
    : l1_(input, hidden, rng), l2_(hidden, labels, rng), act_(act) {}

Tensor MlpClassifier::classify(const ClassifyInput& in) const {
  return l2_(ad::apply_activation(l1_(in.hidden), act_));
}

NamedParams MlpClassifier::params() const {
  NamedParams out;
  ad::append_params(out, "l1.", l1_.params());
  ad::append_params(out, "l2.", l2_.params());
  return out;
}

LstmClassifier::LstmClassifier(std::size_t input, std::size_t hidden,
                               std::size_t labels, std::size_t label_dim,
                               std::mt19937_64& rng)
    : input_(input),
      label_table_(uniform({labels + 1, label_dim}, 0.1, rng)),
      lstm_(make_lstm(input + label_dim, hidden, rng)),
      out_(hidden, labels, rng) {}

Tensor LstmClassifier::classify(const ClassifyInput& in) const {
  require_sequence(in.hidden, "lstm classifier");
  if (in.hidden.dim(2) != input_)
    throw ShapeError("lstm classifier: input width " + std::to_string(in.hidden.dim(2)) +
                     ", expected " + std::to_string(input_));
  const bool forced = in.mode == DecodeMode::kTeacherForced;
  if (forced && !in.gold)
    throw ContractError("lstm classifier: teacher forcing needs gold labels");
  const std::size_t batch = in.hidden.dim(0), steps = in.hidden.dim(1);
  if (forced && in.gold->size() != batch * steps)
    throw ShapeError("lstm classifier: " + std::to_string(in.gold->size()) +
                     " gold labels for " + std::to_string(batch) + "x" +
                     std::to_string(steps));
  const std::size_t k = num_labels();
  const int start = static_cast<int>(k);

  // x·W_x splits into a hidden part projected once for every step and a
  // label part projected once for every label-table row.
  const Tensor w_hidden = ad::slice_rows(lstm_.w_x, 0, input_);
  const Tensor w_label = ad::slice_rows(lstm_.w_x, input_, lstm_.w_x.dim(0));
  const Tensor hidden_proj = ad::matmul(flatten_steps(in.hidden), w_hidden);
  const Tensor label_proj = ad::matmul(label_table_, w_label);

  const std::size_t hs = lstm_.hidden_size();
  Tensor h = Tensor::zeros({batch, hs}), c = Tensor::zeros({batch, hs});
  std::vector<int> prev(batch, start), rows(batch);
  std::vector<Tensor> logits(steps);
  for (std::size_t t = 0; t < steps; ++t) {
    for (std::size_t b = 0; b < batch; ++b) rows[b] = static_cast<int>(b * steps + t);
    const Tensor x = ad::add(ad::gather_rows(hidden_proj, rows),
                             ad::gather_rows(label_proj, prev));
    const auto s = ad::lstm_cell_preact(x, h, c, lstm_);
    h = s.h;
    c = s.c;
    logits[t] = out_(h);
    if (t + 1 == steps) break;
    if (forced) {
      for (std::size_t b = 0; b < batch; ++b) {
        const int g = (*in.gold)[b * steps + t];
        prev[b] = g >= 0 && g < start ? g : start;
      }
    } else {
      prev = argmax_rows(logits[t]);
    }
  }
  return ad::stack_steps(logits);
}

NamedParams LstmClassifier::params() const {
  NamedParams out{{"label_table", label_table_}};
  ad::append_params(out, "lstm.", lstm_.named());
  ad::append_params(out, "out.", out_.params());
  return out;
}

std::vector<int> token_intent_vote(const Tensor& token_logits, const ad::Mask& mask) {
  require_sequence(token_logits, "token_intent_vote");
  const std::size_t batch = token_logits.dim(0), steps = token_logits.dim(1),
                    k = token_logits.dim(2);
  if (mask.size() != batch * steps)
    throw ShapeError("token_intent_vote: mask size does not match logits");
  auto v = token_logits.values();
  std::vector<int> out(batch);
  std::vector<std::size_t> votes(k);
  std::vector<double> prob_sum(k), p(k);
  for (std::size_t b = 0; b < batch; ++b) {
    std::fill(votes.begin(), votes.end(), 0);
    std::fill(prob_sum.begin(), prob_sum.end(), 0.0);
    std::size_t used = 0;
    for (std::size_t t = 0; t < steps; ++t) {
      if (!mask[b * steps + t]) continue;
      ++used;
      const double* row = v.data() + (b * steps + t) * k;
      const double mx = *std::max_element(row, row + k);
      double z = 0.0;
      for (std::size_t j = 0; j < k; ++j) z += (p[j] = std::exp(row[j] - mx));
      for (std::size_t j = 0; j < k; ++j) prob_sum[j] += p[j] / z;
      ++votes[static_cast<std::size_t>(std::max_element(row, row + k) - row)];
    }
    if (used == 0)
      throw ContractError("token_intent_vote: row " + std::to_string(b) + " has no tokens");
    std::size_t best = 0;
    for (std::size_t j = 1; j < k; ++j)
      if (votes[j] > votes[best] ||
          (votes[j] == votes[best] && prob_sum[j] > prob_sum[best]))
        best = j;
    out[b] = static_cast<int>(best);
  }
  return out;
}

std::vector<std::vector<int>> decode_multi_intent(const Tensor& scores, double tau) {
  if (scores.rank() != 2)
    throw ShapeError("decode_multi_intent: expected [B×K], got " + ad::to_string(scores.shape()));
  const std::size_t batch = scores.dim(0), k = scores.dim(1);
  auto v = scores.values();
  std::vector<std::vector<int>> out(batch);
  for (std::size_t b = 0; b < batch; ++b) {
    const double* row = v.data() + b * k;
    for (std::size_t j = 0; j < k; ++j)
      if (1.0 / (1.0 + std::exp(-row[j])) > tau) out[b].push_back(static_cast<int>(j));
    if (out[b].empty())
      out[b].push_back(static_cast<int>(std::max_element(row, row + k) - row));
  }
  return out;
}

}  // namespace slukit::nn
