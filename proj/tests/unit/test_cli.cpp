#include <doctest.h>

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>

#include <httplib.h>
#include <json.hpp>
#include <sys/wait.h>

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

const fs::path kFixtures = SLUKIT_FIXTURE_DIR;
const fs::path kWork = fs::temp_directory_path() / "slukit_cli_test";

struct Result {
  int code;
  std::string out, err;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

Result cli(const std::string& args) {
  fs::create_directories(kWork);
  const auto out = kWork / "stdout.txt", err = kWork / "stderr.txt";
  const std::string cmd = std::string("\"") + SLUKIT_CLI + "\" " + args + " >" + out.string() +
                          " 2>" + err.string();
  const int status = std::system(cmd.c_str());
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(out), slurp(err)};
}

json error_line(const Result& r) {
  const auto nl = r.err.find_last_of('\n', r.err.size() - 2);
  return json::parse(nl == std::string::npos ? r.err : r.err.substr(nl + 1));
}

fs::path write_config(const std::string& name, const std::string& extra = "") {
  fs::create_directories(kWork);
  const auto p = kWork / name;
  std::ofstream(p) << "data:\n  root: \"" << kFixtures.string() << "\"\n  name: music\n"
                   << "model:\n  embedding: {dim: 16, dropout: 0.0}\n"
                   << "  encoder: {__model_target__: bilstm, hidden_size: 16}\n"
                   << "  intent_classifier: {__model_target__: mlp, hidden_size: 16}\n"
                   << "  slot_classifier: {__model_target__: mlp, hidden_size: 16}\n"
                   << "trainer:\n  epochs: 40\n  batch_size: 4\n  learning_rate: 0.01\n"
                   << "  early_stop_patience: 0\n  seed: 3\n"
                   << extra;
  return p;
}

}  // namespace

TEST_CASE("help and usage errors") {
  auto r = cli("--help");
  CHECK(r.code == 0);
  CHECK(r.out.find("train") != std::string::npos);
  CHECK(cli("train --help").code == 0);

  r = cli("train --config " + write_config("ok.yaml").string() + " --bogus");
  CHECK(r.code == 2);
  CHECK(error_line(r)["error"]["kind"] == "usage");
  CHECK(cli("frobnicate").code == 2);
  CHECK(cli("train --config /no/such/file.yaml").code == 2);
}

TEST_CASE("config errors exit 2 with a path") {
  auto r = cli("train --config " + write_config("bad.yaml").string() +
               " --set trainer.epochs=many --run-dir " + (kWork / "never").string());
  CHECK(r.code == 2);
  const auto e = error_line(r)["error"];
  CHECK(e["kind"] == "config");
  CHECK(e["path"] == "trainer.epochs");
  CHECK_FALSE(fs::exists(kWork / "never" / "model.ckpt"));

  r = cli("train --config " + write_config("asm.yaml").string() +
          " --set model.intent_classifier.__model_target__=lstm --run-dir " +
          (kWork / "never").string());
  CHECK(r.code == 2);
  CHECK(error_line(r)["error"]["kind"] == "assembly");
}

TEST_CASE("data errors exit 3") {
  auto r = cli("train --config " + write_config("missing.yaml").string() +
               " --dataset no_such_dataset --run-dir " + (kWork / "never").string());
  CHECK(r.code == 3);
  CHECK(error_line(r)["error"]["kind"] == "data");

  std::ofstream(kWork / "broken.jsonl") << "{\"text\": [\"a\"]\n";
  r = cli("analyze --predictions " + (kWork / "broken.jsonl").string());
  CHECK(r.code == 3);
  CHECK(error_line(r)["error"]["kind"] == "parse");
}

TEST_CASE("train, evaluate, predict, analyze and serve") {
  const auto run = kWork / "run";
  fs::remove_all(run);
  auto r = cli("train --config " + write_config("smoke.yaml").string() +
               " --set trainer.epochs=1 --device gpu --run-dir " + run.string());
  REQUIRE(r.code == 0);
  CHECK(json::parse(r.out)["epochs_run"] == 1);
  for (const char* f : {"config.yaml", "model.ckpt", "vocab.json", "log.jsonl", "train.log",
                        "predictions.jsonl", "metrics.json", "report.json"})
    CHECK(fs::exists(run / f));
  CHECK(slurp(run / "config.yaml").find("\"device\": \"gpu\"") != std::string::npos);

  r = cli("evaluate --run-dir " + run.string() + " --split train --out " + (kWork / "eval").string());
  CHECK(r.code == 0);
  CHECK(fs::exists(kWork / "eval" / "metrics.json"));

  r = cli("predict --run-dir " + run.string() + " --input " +
          (kFixtures / "music" / "multi.jsonl").string() + " --out " +
          (kWork / "pred.jsonl").string());
  CHECK(r.code == 0);
  CHECK(json::parse(r.out)["records"] == 3);

  r = cli("analyze --predictions " + (kWork / "pred.jsonl").string() + " --out " +
          (kWork / "report.json").string());
  CHECK(r.code == 0);
  const auto first = slurp(kWork / "report.json");
  CHECK(cli("analyze --predictions " + (kWork / "pred.jsonl").string() + " --out " +
            (kWork / "report.json").string())
            .code == 0);
  CHECK(slurp(kWork / "report.json") == first);

  fs::copy(run, kWork / "corrupt", fs::copy_options::recursive | fs::copy_options::overwrite_existing);
  std::ofstream(kWork / "corrupt" / "model.ckpt", std::ios::binary) << "SLUF";
  r = cli("evaluate --run-dir " + (kWork / "corrupt").string());
  CHECK(r.code == 3);
  CHECK(error_line(r)["error"]["kind"] == "parse");

  // a checkpoint from another vocabulary breaks the run contract
  const auto small = kWork / "small";
  fs::remove_all(small);
  REQUIRE(cli("train --config " + write_config("small.yaml").string() +
              " --set trainer.epochs=1 --set data.train_limit=2 --run-dir " + small.string())
              .code == 0);
  fs::copy_file(small / "model.ckpt", kWork / "corrupt" / "model.ckpt",
                fs::copy_options::overwrite_existing);
  r = cli("evaluate --run-dir " + (kWork / "corrupt").string());
  CHECK(r.code == 1);
  CHECK(error_line(r)["error"]["kind"] == "contract");

  // serve in the background and query it
  const int port = 18000 + static_cast<int>(::getpid() % 2000);
  const auto pid_file = kWork / "serve.pid";
  const std::string cmd = std::string("\"") + SLUKIT_CLI + "\" serve --report " +
                          (kWork / "report.json").string() + " --run-dir " + run.string() +
                          " --port " + std::to_string(port) + " >/dev/null 2>&1 & echo $! >" +
                          pid_file.string();
  REQUIRE(std::system(cmd.c_str()) == 0);
  httplib::Client client("127.0.0.1", port);
  httplib::Result res;
  for (int i = 0; i < 100 && !res; ++i) {
    std::this_thread::sleep_for(std::chrono::milliseconds(50));
    res = client.Get("/api/report");
  }
  REQUIRE(res);
  CHECK(json::parse(res->body)["model_loaded"] == true);
  CHECK(json::parse(res->body)["summary"] == json::parse(first)["summary"]);
  res = client.Post("/api/predict", R"({"text":"listen to rock music"})", "application/json");
  REQUIRE(res);
  CHECK(res->status == 200);
  CHECK(std::system(("kill " + slurp(pid_file)).c_str()) == 0);
}
