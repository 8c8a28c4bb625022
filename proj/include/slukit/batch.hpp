#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "slukit/ops.hpp"
#include "slukit/vocab.hpp"

namespace slukit::data {

// Row-major [batch×max_len] for the per-token fields.
struct Batch {
  std::size_t batch_size = 0;
  std::size_t max_len = 0;
  std::vector<int> token_ids;
  std::vector<int> slot_ids;  // kIgnoreIndex off-mask and for unseen labels
  ad::Mask mask;
  std::vector<std::size_t> lengths;
  std::vector<std::size_t> indices;  // position of each row in the source list
  // Single-intent mode: one id per row, kIgnoreIndex when unseen.
  std::vector<int> intent_ids;
  // Multi-intent mode: [batch×|intents|] 0/1 targets.
  std::vector<double> intent_multi_hot;
};

Batch make_batch(std::span<const Utterance> utts,
                 std::span<const std::size_t> indices, const Vocabularies& vocabs);

// Batch order over `count` items: identity without a seed, otherwise a
// Fisher-Yates shuffle driven by the seed.
std::vector<std::size_t> batch_order(std::size_t count,
                                     std::optional<std::uint64_t> shuffle_seed);

// Consecutive batches over `batch_order`; the final partial batch is kept.
std::vector<Batch> collate(std::span<const Utterance> utts,
                           const Vocabularies& vocabs, std::size_t batch_size,
                           std::optional<std::uint64_t> shuffle_seed = std::nullopt);

}  // namespace slukit::data
