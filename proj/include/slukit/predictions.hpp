#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "slukit/metrics.hpp"

namespace slukit::data {

// One line of predictions.jsonl. Intent sets serialize '#'-joined.
struct PredictionRecord {
  std::vector<std::string> text;
  std::vector<std::string> golden_intent;
  std::vector<std::string> golden_slot;
  std::vector<std::string> pred_intent;
  std::vector<std::string> pred_slot;
  bool operator==(const PredictionRecord&) const = default;
};

nlohmann::ordered_json to_json(const PredictionRecord& r);
// Malformed lines raise ParseError with the 1-based line number.
std::vector<PredictionRecord> read_predictions(std::istream& in);
std::vector<PredictionRecord> read_predictions(const std::filesystem::path& path);
void write_predictions(std::ostream& out, const std::vector<PredictionRecord>& records);
void write_predictions(const std::filesystem::path& path,
                       const std::vector<PredictionRecord>& records);

metrics::MetricReport score(const std::vector<PredictionRecord>& records,
                            metrics::SlotMatch match = metrics::SlotMatch::kToken);

}  // namespace slukit::data
