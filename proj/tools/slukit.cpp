// slukit: train, evaluate, predict, analyze and serve from the command line.
//
// Exit status: 0 success, 2 bad configuration or flags, 3 missing or
// malformed data, 1 anything else. Failures print one JSON line on stderr.

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <json.hpp>

#include "slukit/error.hpp"
#include "slukit/run.hpp"
#include "slukit/service.hpp"

namespace fs = std::filesystem;
using namespace slukit;

namespace {

struct Common {
  std::string config;
  std::vector<std::string> sets;
  std::string dataset;
  std::string run_dir;
  std::string device;
  std::string split;
};

std::vector<std::string> overrides(const Common& c) {
  std::vector<std::string> out = c.sets;
  if (!c.dataset.empty()) out.push_back("data.name=" + c.dataset);
  if (!c.device.empty()) out.push_back("trainer.device=" + c.device);
  return out;
}

int fail(int code, const std::string& kind, const std::string& message,
         const std::string& path = "") {
  nlohmann::ordered_json j{{"error", {{"kind", kind}, {"message", message}}}};
  if (!path.empty()) j["error"]["path"] = path;
  std::cerr << j.dump() << std::endl;
  return code;
}

int exit_code(const Error& e) {
  const auto& k = e.kind();
  if (k == "config" || k == "assembly") return 2;
  if (k == "data" || k == "parse" || k == "degenerate") return 3;
  return 1;
}

void print(const nlohmann::ordered_json& j) { std::cout << j.dump() << std::endl; }

int cmd_train(const Common& c, const config::Registry& reg) {
  const auto ov = overrides(c);
  const auto cfg = config::load_config(c.config, ov, reg);
  const fs::path dir = c.run_dir.empty() ? fs::path("runs") / fs::path(c.config).stem()
                                         : fs::path(c.run_dir);
  const auto summary = run::train_run(cfg, reg, dir, &std::cerr);
  print({{"run_dir", dir.string()},
         {"best_epoch", summary.log.best_epoch},
         {"epochs_run", summary.log.epochs.size()},
         {"split", cfg.trainer.eval_split},
         {"metrics", summary.eval.to_json()}});
  return 0;
}

std::vector<data::Utterance> eval_data(const run::Loaded& r, const std::string& split) {
  return train::load_split(r.cfg.data, split.empty() ? r.cfg.trainer.eval_split : split);
}

int cmd_evaluate(const Common& c, const config::Registry& reg, const std::string& out) {
  const auto r = run::load(c.run_dir, reg, overrides(c));
  const auto utts = eval_data(r, c.split);
  const fs::path dir = out.empty() ? fs::path(c.run_dir) : fs::path(out);
  fs::create_directories(dir);
  const auto m = run::write_evaluation(r, utts, dir);
  print({{"metrics", m.to_json()}, {"out", (dir / run::files::kMetrics).string()}});
  return 0;
}

int cmd_predict(const Common& c, const config::Registry& reg, const std::string& input,
                const std::string& out) {
  const auto r = run::load(c.run_dir, reg, overrides(c));
  const auto utts =
      input.empty() ? eval_data(r, c.split) : data::ingest_dataset(input, data::CorpusFormat::kJsonl);
  if (utts.empty()) throw DegenerateError("nothing to predict");
  const auto records = train::predict(r.model, r.vocabs, utts, r.cfg.trainer.batch_size);
  const fs::path path = out.empty() ? fs::path(c.run_dir) / run::files::kPredictions : fs::path(out);
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  data::write_predictions(path, records);
  print({{"records", records.size()}, {"out", path.string()}});
  return 0;
}

int cmd_analyze(const std::string& predictions, const std::string& out) {
  const auto records = data::read_predictions(predictions);
  const fs::path path = out.empty() ? fs::path(predictions).parent_path() / run::files::kReport
                                    : fs::path(out);
  run::write_report(records, path);
  const auto report = analysis::build_report(records);
  print({{"utterances", report.utterances},
         {"error_labels", report.distribution.size()},
         {"out", path.string()}});
  return 0;
}

int cmd_serve(const Common& c, const config::Registry& reg, std::string report, int port,
              const std::string& host) {
  service::Options opt;
  if (!c.config.empty() || !c.run_dir.empty()) {
    const auto cfg = !c.config.empty()
                         ? config::load_config(c.config, overrides(c), reg)
                         : config::load_config(fs::path(c.run_dir) / run::files::kConfig,
                                               overrides(c), reg);
    opt.host = cfg.service.host;
    opt.port = static_cast<int>(cfg.service.port);
    opt.page_size = cfg.service.page_size;
  }
  if (port > 0) opt.port = port;
  if (!host.empty()) opt.host = host;
  if (report.empty()) {
    if (c.run_dir.empty()) throw ConfigError("report", "serve needs --report or --run-dir");
    report = (fs::path(c.run_dir) / run::files::kReport).string();
  }
  std::optional<fs::path> run_dir;
  if (!c.run_dir.empty()) run_dir = c.run_dir;
  auto svc = service::from_files(report, run_dir, reg, opt);
  std::cerr << "serving " << report << " on http://" << opt.host << ":" << opt.port << std::endl;
  if (!svc.listen()) throw Error("service", "cannot listen on " + opt.host + ":" + std::to_string(opt.port));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Joint intent detection and slot filling toolkit"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Show help for every subcommand");

  Common c;
  std::string out, input, predictions, report, host;
  int port = 0;

  auto add_overrides = [&](CLI::App* s) {
    s->add_option("--set", c.sets, "Override a config value, KEY.PATH=VALUE (repeatable)");
    s->add_option("--dataset", c.dataset, "Dataset name, same as --set data.name=NAME");
    s->add_option("--device", c.device, "Device hint recorded in the run (execution is on cpu)");
  };

  auto* train = app.add_subcommand("train", "Train a model and populate a run directory");
  train->add_option("--config", c.config, "YAML config file")->required()->check(CLI::ExistingFile);
  train->add_option("--run-dir", c.run_dir, "Output directory (default runs/<config name>)");
  add_overrides(train);

  auto* evaluate = app.add_subcommand("evaluate", "Score a trained run; writes metrics.json");
  evaluate->add_option("--run-dir", c.run_dir, "Run directory from train")->required();
  evaluate->add_option("--split", c.split, "Split to score (default trainer.eval_split)");
  evaluate->add_option("--out", out, "Output directory (default the run directory)");
  add_overrides(evaluate);

  auto* predict = app.add_subcommand("predict", "Write predictions.jsonl for a dataset");
  predict->add_option("--run-dir", c.run_dir, "Run directory from train")->required();
  predict->add_option("--split", c.split, "Split to predict (default trainer.eval_split)");
  predict->add_option("--input", input, "A JSONL corpus to predict instead of a split");
  predict->add_option("--out", out, "Output file (default <run-dir>/predictions.jsonl)");
  add_overrides(predict);

  auto* analyze = app.add_subcommand("analyze", "Build report.json from a predictions file");
  analyze->add_option("--predictions", predictions, "predictions.jsonl")->required();
  analyze->add_option("--out", out, "Output file (default report.json next to the input)");

  auto* serve = app.add_subcommand("serve", "Serve a report (and optionally a model) over HTTP");
  serve->add_option("--report", report, "report.json (default <run-dir>/report.json)");
  serve->add_option("--run-dir", c.run_dir, "Run directory whose model answers /api/predict");
  serve->add_option("--config", c.config, "Config whose service section sets host and port");
  serve->add_option("--port", port, "Port (default service.port, 8000)")->check(CLI::Range(1, 65535));
  serve->add_option("--host", host, "Bind address (default service.host)");
  add_overrides(serve);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return fail(2, "usage", e.what());
  }

  try {
    const auto reg = config::Registry::with_builtins();
    if (*train) return cmd_train(c, reg);
    if (*evaluate) return cmd_evaluate(c, reg, out);
    if (*predict) return cmd_predict(c, reg, input, out);
    if (*analyze) return cmd_analyze(predictions, out);
    if (*serve) return cmd_serve(c, reg, report, port, host);
  } catch (const ConfigError& e) {
    return fail(2, e.kind(), e.what(), e.path());
  } catch (const Error& e) {
    return fail(exit_code(e), e.kind(), e.what());
  } catch (const std::filesystem::filesystem_error& e) {
    return fail(3, "data", e.what());
  } catch (const std::exception& e) {
    return fail(1, "runtime", e.what());
  }
  return 1;
}
