#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "slukit/checkpoint.hpp"
#include "slukit/error.hpp"
#include "slukit/run.hpp"

using namespace slukit;
namespace fs = std::filesystem;

namespace {

const fs::path kFixtures = SLUKIT_FIXTURE_DIR;

config::Config fixture_config(std::vector<std::string> extra = {}) {
  std::vector<std::string> ov{"data.root=" + kFixtures.string(),
                              "data.name=music",
                              "model.embedding.dim=16",
                              "model.embedding.dropout=0.0",
                              "model.encoder.hidden_size=16",
                              "model.intent_classifier.hidden_size=16",
                              "model.slot_classifier.hidden_size=16",
                              "trainer.batch_size=4",
                              "trainer.learning_rate=0.01",
                              "trainer.early_stop_patience=0",
                              "trainer.seed=3"};
  ov.insert(ov.end(), extra.begin(), extra.end());
  return config::default_config(ov, config::Registry::with_builtins());
}

std::vector<data::Utterance> fixture_split(const char* name) {
  return data::read_jsonl(kFixtures / "music" / (std::string(name) + ".jsonl"));
}

fs::path fresh_dir(const std::string& name) {
  const auto d = fs::temp_directory_path() / "slukit_trainer_test" / name;
  fs::remove_all(d);
  return d;
}

std::string checkpoint_bytes(const nn::JointModel& m) {
  return ad::encode_checkpoint(ad::snapshot(m.params()));
}

}  // namespace

TEST_CASE("patience zero runs every epoch and seeds fix the log") {
  const auto reg = config::Registry::with_builtins();
  const auto cfg = fixture_config({"trainer.epochs=6"});
  const auto tr = fixture_split("train");
  const auto a = train::train(cfg, reg, tr, tr);
  const auto b = train::train(cfg, reg, tr, tr);
  REQUIRE(a.log.epochs.size() == 6);
  CHECK(a.log.best_epoch == b.log.best_epoch);
  for (std::size_t i = 0; i < 6; ++i) {
    CHECK(a.log.epochs[i].train_loss == b.log.epochs[i].train_loss);
    CHECK(a.log.epochs[i].dev == b.log.epochs[i].dev);
  }
  CHECK(checkpoint_bytes(a.model) == checkpoint_bytes(b.model));

  // loss falls over the first three epochs
  CHECK(a.log.epochs[1].train_loss < a.log.epochs[0].train_loss);
  CHECK(a.log.epochs[2].train_loss < a.log.epochs[1].train_loss);

  const auto c = train::train(fixture_config({"trainer.epochs=6", "trainer.seed=4"}), reg, tr, tr);
  CHECK(checkpoint_bytes(a.model) != checkpoint_bytes(c.model));
}

TEST_CASE("early stopping keeps the best dev epoch") {
  const auto reg = config::Registry::with_builtins();
  const auto tr = fixture_split("train");
  const auto dev = fixture_split("test");
  const auto cfg = fixture_config({"trainer.epochs=40", "trainer.early_stop_patience=3"});
  const auto t = train::train(cfg, reg, tr, dev);
  const auto& e = t.log.epochs;
  REQUIRE(t.log.best_epoch >= 1);
  const double best = e[t.log.best_epoch - 1].dev.ema;
  for (std::size_t i = 0; i < t.log.best_epoch; ++i) CHECK(e[i].dev.ema <= best);
  for (std::size_t i = t.log.best_epoch; i < e.size(); ++i) CHECK(e[i].dev.ema <= best);
  if (e.size() < 40) CHECK(e.size() - t.log.best_epoch == 3);
  // the returned parameters are the best epoch's, not the last epoch's
  CHECK(train::evaluate(t.model, t.vocabs, dev, 4).ema == best);
}

TEST_CASE("overfitting the fixture reaches exact match 1") {
  const auto reg = config::Registry::with_builtins();
  const auto tr = fixture_split("train");
  const auto t = train::train(fixture_config({"trainer.epochs=60"}), reg, tr, tr);
  const auto m = train::evaluate(t.model, t.vocabs, tr, 4);
  CHECK(m.ema == 1.0);
  CHECK(m.slot_f1 == 1.0);

  SUBCASE("evaluation is deterministic and rejects empty data") {
    CHECK(train::evaluate(t.model, t.vocabs, tr, 4) == m);
    CHECK(train::evaluate(t.model, t.vocabs, tr, 3) == m);
    CHECK_THROWS_AS(train::evaluate(t.model, t.vocabs, {}, 4), DegenerateError);
  }

  SUBCASE("predictions align and reproduce the metric report") {
    const auto dev = fixture_split("test");
    const auto records = train::predict(t.model, t.vocabs, dev, 2);
    REQUIRE(records.size() == dev.size());
    for (std::size_t i = 0; i < dev.size(); ++i) {
      CHECK(records[i].text == dev[i].text);
      CHECK(records[i].pred_slot.size() == dev[i].text.size());
    }
    std::stringstream file;
    data::write_predictions(file, records);
    const auto back = data::read_predictions(file);
    CHECK(back == records);
    CHECK(data::score(back) == train::evaluate(t.model, t.vocabs, dev, 2));
  }
}

TEST_CASE("divergence names the batch") {
  const auto reg = config::Registry::with_builtins();
  const auto tr = fixture_split("train");
  const auto cfg = fixture_config(
      {"model.embedding.dim=4", "model.embedding.word_vectors=" +
                                    (kFixtures / "music" / "nan_vectors.txt").string()});
  try {
    train::train(cfg, reg, tr, tr);
    FAIL("expected divergence");
  } catch (const DivergenceError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("epoch 1, batch") != std::string::npos);
    CHECK(msg.find("utterances") != std::string::npos);
  }
}

TEST_CASE("multi-intent training") {
  const auto reg = config::Registry::with_builtins();
  const auto tr = fixture_split("multi");
  const auto cfg = fixture_config(
      {"data.multi_intent=true", "model.intent_mode=multi", "trainer.epochs=80"});
  const auto t = train::train(cfg, reg, tr, tr);
  const auto m = train::evaluate(t.model, t.vocabs, tr, 4);
  CHECK(m.intent_accuracy == 1.0);
  const auto recs = train::predict(t.model, t.vocabs, tr, 4);
  CHECK(recs[0].pred_intent.size() == 2);
}

TEST_CASE("run directory") {
  const auto reg = config::Registry::with_builtins();
  const auto dir = fresh_dir("run");
  const auto cfg = fixture_config({"trainer.epochs=5"});
  const auto summary = run::train_run(cfg, reg, dir);
  for (const char* f : {run::files::kConfig, run::files::kCheckpoint, run::files::kVocab,
                        run::files::kLog, run::files::kTextLog, run::files::kPredictions,
                        run::files::kMetrics, run::files::kReport})
    CHECK(fs::exists(dir / f));

  std::ifstream log(dir / run::files::kLog);
  std::string line;
  std::size_t epochs = 0;
  while (std::getline(log, line))
    epochs += nlohmann::json::parse(line)["event"] == "epoch";
  CHECK(epochs == 5);

  const auto loaded = run::load(dir, reg);
  const auto test = fixture_split("test");
  CHECK(train::evaluate(loaded.model, loaded.vocabs, test, cfg.trainer.batch_size) == summary.eval);
  CHECK(metrics::MetricReport::from_json(nlohmann::json::parse(run::read_text(dir / "metrics.json"))) ==
        summary.eval);
  CHECK(data::score(data::read_predictions(dir / run::files::kPredictions)) == summary.eval);

  SUBCASE("same config and seed give identical artifacts") {
    const auto again = fresh_dir("run_again");
    run::train_run(cfg, reg, again);
    for (const char* f : {run::files::kCheckpoint, run::files::kMetrics, run::files::kReport,
                          run::files::kPredictions, run::files::kConfig, run::files::kVocab})
      CHECK(run::read_text(dir / f) == run::read_text(again / f));
  }

  SUBCASE("vocabulary mismatch is a contract error") {
    auto vj = nlohmann::json::parse(run::read_text(dir / run::files::kVocab));
    const auto copy = fresh_dir("run_bad");
    fs::create_directories(copy);
    for (const auto& e : fs::directory_iterator(dir)) fs::copy(e.path(), copy / e.path().filename());
    vj["slots"]["tokens"].push_back("B-extra");
    run::write_text(copy / run::files::kVocab, vj.dump());
    CHECK_THROWS_AS(run::load(copy, reg), ContractError);
  }

  SUBCASE("missing data") {
    const auto bad = fixture_config({"data.name=absent"});
    CHECK_THROWS_AS(run::train_run(bad, reg, fresh_dir("run_missing")), DataError);
  }
}
