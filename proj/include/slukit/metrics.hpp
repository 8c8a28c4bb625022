#pragma once

#include <compare>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

namespace slukit::metrics {

using Labels = std::vector<std::string>;
using IntentSet = std::vector<std::string>;

// `end` is inclusive.
struct Span {
  std::string label;
  int start = 0;
  int end = 0;
  auto operator<=>(const Span&) const = default;
};

// Lenient CoNLL chunking: an I-x that does not continue an open x span opens
// a new one. Labels other than B-x/I-x close any open span.
std::vector<Span> extract_spans(std::span<const std::string> labels);

struct SlotScores {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

// Micro-averaged over the corpus; 0/0 is 0.
SlotScores slot_f1(std::span<const Labels> gold, std::span<const Labels> pred);

// Order-insensitive set equality per utterance.
double intent_accuracy(std::span<const IntentSet> gold, std::span<const IntentSet> pred);

// Unweighted mean of per-label F1 over labels seen in gold or pred.
double intent_macro_f1(std::span<const IntentSet> gold, std::span<const IntentSet> pred);

enum class SlotMatch { kToken, kSpan };

double exact_match_accuracy(std::span<const IntentSet> gold_intents,
                            std::span<const IntentSet> pred_intents,
                            std::span<const Labels> gold_slots,
                            std::span<const Labels> pred_slots,
                            SlotMatch match = SlotMatch::kToken);

struct MetricReport {
  double slot_f1 = 0.0;
  double slot_precision = 0.0;
  double slot_recall = 0.0;
  double intent_accuracy = 0.0;
  double intent_macro_f1 = 0.0;
  double ema = 0.0;

  nlohmann::ordered_json to_json() const;
  static MetricReport from_json(const nlohmann::json& j);
  bool operator==(const MetricReport&) const = default;
};

MetricReport compute_report(std::span<const IntentSet> gold_intents,
                            std::span<const IntentSet> pred_intents,
                            std::span<const Labels> gold_slots,
                            std::span<const Labels> pred_slots,
                            SlotMatch match = SlotMatch::kToken);

SlotMatch parse_slot_match(std::string_view name);

}  // namespace slukit::metrics
