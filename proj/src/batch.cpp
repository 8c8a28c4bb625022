#include "slukit/batch.hpp"

#include <algorithm>
#include <numeric>
#include <random>

#include "slukit/error.hpp"

namespace slukit::data {

Batch make_batch(std::span<const Utterance> utts,
                 std::span<const std::size_t> indices, const Vocabularies& vocabs) {
  if (indices.empty()) throw DegenerateError("empty batch");
  Batch b;
  b.batch_size = indices.size();
  for (auto i : indices) b.max_len = std::max(b.max_len, utts[i].text.size());
  const std::size_t t_max = b.max_len;
  b.token_ids.assign(b.batch_size * t_max, kPadId);
  b.slot_ids.assign(b.batch_size * t_max, kIgnoreIndex);
  b.mask.assign(b.batch_size * t_max, 0);
  const std::size_t k = vocabs.intents.size();
  if (vocabs.options.multi_intent) b.intent_multi_hot.assign(b.batch_size * k, 0.0);
  for (std::size_t r = 0; r < b.batch_size; ++r) {
    const auto& u = utts[indices[r]];
    b.indices.push_back(indices[r]);
    b.lengths.push_back(u.text.size());
    for (std::size_t t = 0; t < u.text.size(); ++t) {
      b.token_ids[r * t_max + t] = vocabs.token_id(u.text[t]);
      b.slot_ids[r * t_max + t] = vocabs.slots.label_id(u.slot[t]);
      b.mask[r * t_max + t] = 1;
    }
    if (vocabs.options.multi_intent) {
      for (const auto& i : u.intent)
        if (auto id = vocabs.intents.find(i))
          b.intent_multi_hot[r * k + static_cast<std::size_t>(*id)] = 1.0;
    } else {
      b.intent_ids.push_back(vocabs.intents.label_id(join_intents(u.intent)));
    }
  }
  return b;
}

std::vector<std::size_t> batch_order(std::size_t count,
                                     std::optional<std::uint64_t> shuffle_seed) {
  std::vector<std::size_t> order(count);
  std::iota(order.begin(), order.end(), std::size_t{0});
  if (shuffle_seed) {
    std::mt19937_64 rng(*shuffle_seed);
    for (std::size_t i = count; i > 1; --i) {
      std::uniform_int_distribution<std::size_t> pick(0, i - 1);
      std::swap(order[i - 1], order[pick(rng)]);
    }
  }
  return order;
}

std::vector<Batch> collate(std::span<const Utterance> utts,
                           const Vocabularies& vocabs, std::size_t batch_size,
                           std::optional<std::uint64_t> shuffle_seed) {
  if (batch_size < 1) throw ContractError("batch_size must be at least 1");
  const auto order = batch_order(utts.size(), shuffle_seed);
  std::vector<Batch> out;
  for (std::size_t start = 0; start < order.size(); start += batch_size) {
    const std::size_t end = std::min(order.size(), start + batch_size);
    out.push_back(make_batch(
        utts, std::span<const std::size_t>(order).subspan(start, end - start), vocabs));
  }
  return out;
}

}  // namespace slukit::data
