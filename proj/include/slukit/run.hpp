#pragma once

// Run directories: everything `train` leaves behind and what the other
// subcommands read back.

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "slukit/analysis.hpp"
#include "slukit/config.hpp"
#include "slukit/trainer.hpp"

namespace slukit::run {

namespace files {
inline constexpr const char* kConfig = "config.yaml";
inline constexpr const char* kCheckpoint = "model.ckpt";
inline constexpr const char* kVocab = "vocab.json";
inline constexpr const char* kLog = "log.jsonl";
inline constexpr const char* kTextLog = "train.log";
inline constexpr const char* kPredictions = "predictions.jsonl";
inline constexpr const char* kMetrics = "metrics.json";
inline constexpr const char* kReport = "report.json";
}  // namespace files

struct Loaded {
  config::Config cfg;
  data::Vocabularies vocabs;
  nn::JointModel model;
};

struct TrainSummary {
  train::TrainLog log;
  metrics::MetricReport eval;  // on trainer.eval_split
};

// Training split with data.train_limit applied.
std::vector<data::Utterance> load_train_split(const config::DataConfig& data);

// Trains from `cfg` and writes the full run directory. `progress` gets one
// human-readable line per epoch.
TrainSummary train_run(const config::Config& cfg, const config::Registry& registry,
                       const std::filesystem::path& dir, std::ostream* progress = nullptr);

// Reads config.yaml, vocab.json and model.ckpt. ContractError when the
// checkpoint does not fit the vocabularies.
Loaded load(const std::filesystem::path& dir, const config::Registry& registry,
            std::span<const std::string> overrides = {});

// predictions.jsonl, metrics.json and report.json for `utts` under `dir`.
metrics::MetricReport write_evaluation(const Loaded& run, std::span<const data::Utterance> utts,
                                       const std::filesystem::path& dir);

// Writes report.json next to nothing else; returns the serialized text.
std::string write_report(const std::vector<data::PredictionRecord>& records,
                         const std::filesystem::path& out);

std::string metrics_text(const metrics::MetricReport& r);
void write_text(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);

}  // namespace slukit::run
