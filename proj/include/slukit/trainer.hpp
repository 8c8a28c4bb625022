#pragma once

#include <functional>
#include <optional>
#include <span>
#include <vector>

#include <json.hpp>

#include "slukit/config.hpp"
#include "slukit/data.hpp"
#include "slukit/metrics.hpp"
#include "slukit/model.hpp"
#include "slukit/predictions.hpp"
#include "slukit/vocab.hpp"

namespace slukit::train {

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  metrics::MetricReport dev;
  double wall_seconds = 0.0;
  nlohmann::ordered_json to_json() const;
};

struct TrainLog {
  std::vector<EpochRecord> epochs;
  std::size_t best_epoch = 0;  // 1-based, 0 before the first epoch
  nlohmann::ordered_json to_json() const;
};

// Returning false ends training after this epoch.
using EpochCallback = std::function<bool(const EpochRecord&, bool improved)>;

// A trained model with the vocabularies it was built against.
struct Trained {
  data::Vocabularies vocabs;
  nn::JointModel model;
  TrainLog log;
};

// Reads one split named in the data section. DataError when it is missing.
std::vector<data::Utterance> load_split(const config::DataConfig& data, const std::string& split);

data::VocabOptions vocab_options(const config::DataConfig& data);

// Builds vocabularies from `train`, assembles the model and trains it with
// Adam. Each epoch ends with a dev evaluation; the parameters with the best
// dev EMA are restored before returning. Patience 0 runs every epoch.
Trained train(const config::Config& cfg, const config::Registry& registry,
              std::span<const data::Utterance> train_set,
              std::span<const data::Utterance> dev_set, const EpochCallback& on_epoch = {});

// Eval-mode predictions in input order.
std::vector<data::PredictionRecord> predict(const nn::JointModel& model,
                                            const data::Vocabularies& vocabs,
                                            std::span<const data::Utterance> utts,
                                            std::size_t batch_size);

// DegenerateError on an empty dataset.
metrics::MetricReport evaluate(const nn::JointModel& model, const data::Vocabularies& vocabs,
                               std::span<const data::Utterance> utts, std::size_t batch_size,
                               metrics::SlotMatch match = metrics::SlotMatch::kToken);

}  // namespace slukit::train
