#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "slukit/predictions.hpp"

namespace slukit::analysis {

inline constexpr int kSchemaVersion = 1;

enum class LabelKind { kSlot, kIntent };
std::string_view kind_name(LabelKind kind);

// Errors on one gold label. Slot errors are counted per token, intent errors
// per utterance.
struct ErrorBucket {
  std::string label;
  LabelKind kind = LabelKind::kSlot;
  std::size_t count = 0;
  double share = 0.0;  // of all errors
};

struct TransferTarget {
  std::string predicted;
  std::size_t count = 0;
  double share = 0.0;  // of this label's errors
};

struct Transfer {
  std::string label;
  LabelKind kind = LabelKind::kSlot;
  std::size_t occurrences = 0;
  std::size_t errors = 0;
  double wrong_rate = 0.0;
  std::vector<TransferTarget> targets;  // descending count
};

struct Instance {
  std::size_t index = 0;
  std::vector<std::string> tokens, gold_slots, pred_slots;
  std::vector<std::string> gold_intent, pred_intent;
  std::vector<bool> mismatch;  // gold_slots[i] != pred_slots[i]
  bool intent_correct = true;
  bool has_error() const;
};

enum class InstanceFilter { kAll, kErrorsOnly };
InstanceFilter parse_instance_filter(std::string_view name);

// Descending by count, then slot before intent, then label.
std::vector<ErrorBucket> error_distribution(const std::vector<data::PredictionRecord>& records);

// LookupError when `label` never occurs as a gold label.
Transfer label_transfer(const std::vector<data::PredictionRecord>& records,
                        const std::string& label);

// `query` is matched case-insensitively against the space-joined text.
std::vector<Instance> build_instances(const std::vector<data::PredictionRecord>& records,
                                      InstanceFilter filter = InstanceFilter::kAll,
                                      const std::string& query = "");
std::vector<Instance> filter_instances(const std::vector<Instance>& all, InstanceFilter filter,
                                       const std::string& query);

// One decimal place, as serialized.
double percent(double share);

nlohmann::ordered_json to_json(const ErrorBucket& b);
nlohmann::ordered_json to_json(const Transfer& t);
nlohmann::ordered_json to_json(const Instance& i);

struct Report {
  std::size_t utterances = 0;
  std::size_t tokens = 0;
  std::vector<ErrorBucket> distribution;
  std::map<std::string, Transfer> transfer;
  std::vector<Instance> instances;
};

Report build_report(const std::vector<data::PredictionRecord>& records);
nlohmann::ordered_json to_json(const Report& r);
// Exact text written to report.json.
std::string serialize(const Report& r);
// Rejects documents whose schema_version or shape does not match.
nlohmann::json parse_report(const std::string& text);

}  // namespace slukit::analysis
