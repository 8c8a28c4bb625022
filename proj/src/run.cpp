#include "slukit/run.hpp"

#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

#include "slukit/checkpoint.hpp"
#include "slukit/error.hpp"

namespace slukit::run {

namespace fs = std::filesystem;

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string metrics_text(const metrics::MetricReport& r) { return r.to_json().dump(2) + "\n"; }

std::vector<data::Utterance> load_train_split(const config::DataConfig& data) {
  auto utts = train::load_split(data, data.train_split);
  if (data.train_limit > 0 && utts.size() > data.train_limit) utts.resize(data.train_limit);
  return utts;
}

std::string write_report(const std::vector<data::PredictionRecord>& records, const fs::path& out) {
  const std::string text = analysis::serialize(analysis::build_report(records));
  write_text(out, text);
  return text;
}

metrics::MetricReport write_evaluation(const Loaded& run, std::span<const data::Utterance> utts,
                                       const fs::path& dir) {
  if (utts.empty()) throw DegenerateError("cannot evaluate an empty dataset");
  const auto records = train::predict(run.model, run.vocabs, utts, run.cfg.trainer.batch_size);
  const auto report =
      data::score(records, metrics::parse_slot_match(run.cfg.trainer.slot_match));
  data::write_predictions(dir / files::kPredictions, records);
  write_text(dir / files::kMetrics, metrics_text(report));
  write_report(records, dir / files::kReport);
  return report;
}

TrainSummary train_run(const config::Config& cfg, const config::Registry& registry,
                       const fs::path& dir, std::ostream* progress) {
  const auto train_set = load_train_split(cfg.data);
  const auto dev_set = train::load_split(cfg.data, cfg.data.dev_split);
  const auto eval_set = train::load_split(cfg.data, cfg.trainer.eval_split);

  fs::create_directories(dir);
  write_text(dir / files::kConfig, config::to_yaml(cfg.tree));
  std::ofstream log(dir / files::kLog, std::ios::binary);
  std::ofstream text(dir / files::kTextLog, std::ios::binary);
  if (!log || !text) throw DataError("cannot write logs under " + dir.string());

  auto event = [&](nlohmann::ordered_json j) { log << j.dump() << '\n' << std::flush; };
  event({{"event", "start"},
         {"train", train_set.size()},
         {"dev", dev_set.size()},
         {"eval", eval_set.size()},
         {"device", cfg.trainer.device},
         {"seed", cfg.trainer.seed}});
  text << "train " << train_set.size() << ", dev " << dev_set.size() << ", "
       << cfg.trainer.eval_split << " " << eval_set.size() << " utterances; device "
       << cfg.trainer.device << " (runs on cpu)\n";

  auto on_epoch = [&](const train::EpochRecord& r, bool improved) {
    auto j = r.to_json();
    j["event"] = "epoch";
    j["improved"] = improved;
    event(j);
    std::ostringstream line;
    line << "epoch " << std::setw(3) << r.epoch << "  loss " << std::fixed << std::setprecision(4)
         << r.train_loss << "  dev slot_f1 " << r.dev.slot_f1 << "  intent_acc "
         << r.dev.intent_accuracy << "  ema " << r.dev.ema << std::setprecision(1) << "  ("
         << r.wall_seconds << "s)" << (improved ? "  *" : "") << "\n";
    text << line.str() << std::flush;
    if (progress) *progress << line.str() << std::flush;
    return true;
  };
  auto trained = train::train(cfg, registry, train_set, dev_set, on_epoch);

  ad::save_checkpoint(dir / files::kCheckpoint, ad::snapshot(trained.model.params()));
  write_text(dir / files::kVocab, trained.vocabs.to_json().dump(1) + "\n");

  Loaded run{cfg, std::move(trained.vocabs), std::move(trained.model)};
  TrainSummary summary{std::move(trained.log), {}};
  summary.eval = write_evaluation(run, eval_set, dir);
  event({{"event", "done"},
         {"best_epoch", summary.log.best_epoch},
         {"eval_split", cfg.trainer.eval_split},
         {"eval", summary.eval.to_json()}});
  text << "best epoch " << summary.log.best_epoch << "; " << cfg.trainer.eval_split << " "
       << summary.eval.to_json().dump() << "\n";
  return summary;
}

Loaded load(const fs::path& dir, const config::Registry& registry,
            std::span<const std::string> overrides) {
  if (!fs::is_directory(dir)) throw DataError("run directory " + dir.string() + " does not exist");
  auto cfg = config::load_config(dir / files::kConfig, overrides, registry);
  nlohmann::json vj;
  try {
    vj = nlohmann::json::parse(read_text(dir / files::kVocab));
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("vocab.json: ") + e.what(), 0);
  }
  auto vocabs = data::Vocabularies::from_json(vj);
  auto model = config::build_model(cfg.model(), vocabs, registry, cfg.trainer.seed);
  try {
    ad::restore(model.params(), ad::load_checkpoint(dir / files::kCheckpoint));
  } catch (const ContractError& e) {
    throw ContractError(std::string("checkpoint does not match the run's vocabularies: ") + e.what());
  }
  return {std::move(cfg), std::move(vocabs), std::move(model)};
}

}  // namespace slukit::run
