#include "slukit/trainer.hpp"

#include <chrono>
#include <cmath>

#include "slukit/batch.hpp"
#include "slukit/checkpoint.hpp"
#include "slukit/error.hpp"
#include "slukit/optim.hpp"

namespace slukit::train {

namespace {

void clip_gradients(const std::vector<ad::Tensor>& params, double max_norm) {
  if (max_norm <= 0.0) return;
  double sq = 0.0;
  for (const auto& p : params)
    for (double g : p.grad()) sq += g * g;
  const double norm = std::sqrt(sq);
  if (norm <= max_norm) return;
  const double s = max_norm / norm;
  for (auto p : params)
    for (double& g : p.mutable_grad()) g *= s;
}

std::vector<std::string> intent_names(const data::Vocabularies& vocabs, const std::vector<int>& ids) {
  std::vector<std::string> out;
  for (int id : ids) {
    const std::string& name = vocabs.intents.token(static_cast<std::size_t>(id));
    if (vocabs.options.multi_intent) {
      out.push_back(name);
    } else {
      for (auto& part : data::split_intents(name)) out.push_back(std::move(part));
    }
  }
  return out;
}

}  // namespace

nlohmann::ordered_json EpochRecord::to_json() const {
  return {{"epoch", epoch},
          {"train_loss", train_loss},
          {"dev", dev.to_json()},
          {"wall_seconds", wall_seconds}};
}

nlohmann::ordered_json TrainLog::to_json() const {
  nlohmann::ordered_json e = nlohmann::ordered_json::array();
  for (const auto& r : epochs) e.push_back(r.to_json());
  return {{"epochs", e}, {"best_epoch", best_epoch}};
}

std::vector<data::Utterance> load_split(const config::DataConfig& data, const std::string& split) {
  return data::ingest_dataset(data.split_path(split), data::parse_corpus_format(data.format));
}

data::VocabOptions vocab_options(const config::DataConfig& data) {
  data::VocabOptions o;
  o.min_freq = data.min_freq;
  o.lowercase = data.lowercase;
  o.multi_intent = data.multi_intent;
  return o;
}

Trained train(const config::Config& cfg, const config::Registry& registry,
              std::span<const data::Utterance> train_set,
              std::span<const data::Utterance> dev_set, const EpochCallback& on_epoch) {
  if (train_set.empty()) throw DegenerateError("training split is empty");
  if (dev_set.empty()) throw DegenerateError("dev split is empty");
  const auto& tc = cfg.trainer;
  const auto match = metrics::parse_slot_match(tc.slot_match);

  data::Vocabularies vocabs = data::build_vocab(train_set, vocab_options(cfg.data));
  nn::JointModel model = config::build_model(cfg.model(), vocabs, registry, tc.seed);
  const ad::NamedParams named = model.params();
  std::vector<ad::Tensor> params;
  for (const auto& p : named) params.push_back(p.second);
  ad::AdamConfig adam_cfg;
  adam_cfg.learning_rate = tc.learning_rate;
  ad::Adam adam(params, adam_cfg);

  // Separate streams for batch order and dropout, both fixed by the seed.
  std::mt19937_64 order_rng(tc.seed ^ 0x5eedULL);
  std::mt19937_64 dropout_rng(tc.seed ^ 0xd509ULL);
  const nn::LossWeights weights{tc.intent_weight, tc.slot_weight};

  TrainLog log;
  std::vector<ad::ParameterRecord> best;
  double best_ema = -1.0;
  std::size_t stale = 0;
  for (std::size_t epoch = 1; epoch <= tc.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto batches = data::collate(train_set, vocabs, tc.batch_size, order_rng());
    double loss_sum = 0.0;
    for (std::size_t bi = 0; bi < batches.size(); ++bi) {
      const auto& batch = batches[bi];
      const auto out = model.forward(batch, nn::Mode::kTrain, &dropout_rng);
      const ad::Tensor loss = model.loss(batch, out, weights);
      const double value = loss.item();
      if (!std::isfinite(value)) {
        std::string ids;
        for (std::size_t i = 0; i < batch.indices.size() && i < 8; ++i)
          ids += (i ? "," : "") + std::to_string(batch.indices[i]);
        if (batch.indices.size() > 8) ids += ",...";
        throw DivergenceError("loss is " + std::to_string(value) + " at epoch " +
                              std::to_string(epoch) + ", batch " + std::to_string(bi) +
                              " (utterances " + ids + ")");
      }
      loss_sum += value;
      adam.zero_grad();
      ad::backward(loss);
      clip_gradients(params, tc.grad_clip);
      adam.step();
    }
    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = loss_sum / static_cast<double>(batches.size());
    rec.dev = evaluate(model, vocabs, dev_set, tc.batch_size, match);
    rec.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool improved = rec.dev.ema > best_ema;
    if (improved) {
      best_ema = rec.dev.ema;
      best = ad::snapshot(named);
      log.best_epoch = epoch;
      stale = 0;
    } else {
      ++stale;
    }
    log.epochs.push_back(rec);
    if (on_epoch && !on_epoch(rec, improved)) break;
    if (tc.early_stop_patience > 0 && stale >= tc.early_stop_patience) break;
  }
  ad::restore(named, best);
  return {std::move(vocabs), std::move(model), std::move(log)};
}

std::vector<data::PredictionRecord> predict(const nn::JointModel& model,
                                            const data::Vocabularies& vocabs,
                                            std::span<const data::Utterance> utts,
                                            std::size_t batch_size) {
  std::vector<data::PredictionRecord> out;
  out.reserve(utts.size());
  const auto batches = data::collate(utts, vocabs, batch_size, std::nullopt);
  for (const auto& batch : batches) {
    const auto preds = model.predict(batch);
    for (std::size_t r = 0; r < batch.batch_size; ++r) {
      const auto& u = utts[batch.indices[r]];
      data::PredictionRecord rec;
      rec.text = u.text;
      rec.golden_intent = u.intent;
      rec.golden_slot = u.slot;
      rec.pred_intent = intent_names(vocabs, preds[r].intents);
      for (int id : preds[r].slots) rec.pred_slot.push_back(vocabs.slots.token(static_cast<std::size_t>(id)));
      out.push_back(std::move(rec));
    }
  }
  return out;
}

metrics::MetricReport evaluate(const nn::JointModel& model, const data::Vocabularies& vocabs,
                               std::span<const data::Utterance> utts, std::size_t batch_size,
                               metrics::SlotMatch match) {
  if (utts.empty()) throw DegenerateError("cannot evaluate an empty dataset");
  return data::score(predict(model, vocabs, utts, batch_size), match);
}

}  // namespace slukit::train
