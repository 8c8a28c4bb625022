#include <doctest.h>

#include <filesystem>
#include <thread>

#include <httplib.h>

#include "slukit/error.hpp"
#include "slukit/service.hpp"

using namespace slukit;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

const fs::path kFixtures = SLUKIT_FIXTURE_DIR;
using Query = std::multimap<std::string, std::string>;

json fixture_report() {
  return json::parse(analysis::serialize(
      analysis::build_report(data::read_predictions(kFixtures / "analysis" / "predictions.jsonl"))));
}

// Toy music-corpus model trained to fit its training file, written as a run directory.
const fs::path& overfit_run() {
  static const fs::path dir = [] {
    const auto d = fs::temp_directory_path() / "slukit_service_test" / "run";
    fs::remove_all(d);
    const auto reg = config::Registry::with_builtins();
    const std::vector<std::string> ov{
        "data.root=" + kFixtures.string(), "data.name=music", "model.embedding.dim=16",
         "model.embedding.dropout=0.0", "model.encoder.hidden_size=16",
         "model.intent_classifier.hidden_size=16", "model.slot_classifier.hidden_size=16",
         "trainer.batch_size=4", "trainer.learning_rate=0.01", "trainer.early_stop_patience=0",
         "trainer.epochs=60", "trainer.seed=3", "trainer.eval_split=train"};
    const auto cfg = config::default_config(ov, reg);
    run::train_run(cfg, reg, d);
    return d;
  }();
  return dir;
}

service::Service fixture_service(std::size_t page_size = 2) {
  service::Options opt;
  opt.page_size = page_size;
  return service::Service(fixture_report(), std::nullopt, opt);
}

}  // namespace

TEST_CASE("report routes") {
  const auto svc = fixture_service();
  const auto report = fixture_report();

  auto r = svc.handle("GET", "/healthz", {}, "");
  CHECK(r.status == 200);

  r = svc.handle("GET", "/api/report", {}, "");
  CHECK(r.status == 200);
  auto j = json::parse(r.body);
  CHECK(j["schema_version"] == analysis::kSchemaVersion);
  CHECK(j["model_loaded"] == false);
  CHECK(j["summary"] == report["summary"]);

  r = svc.handle("GET", "/api/report/distribution", {}, "");
  CHECK(json::parse(r.body) == report["error_distribution"]);

  r = svc.handle("GET", "/api/report/transfer/B-fromloc.city_name", {}, "");
  CHECK(r.status == 200);
  j = json::parse(r.body);
  CHECK(j["wrong_rate_percent"] == 50.0);
  CHECK(j["transfer"][0]["predicted"] == "O");

  CHECK(svc.handle("GET", "/api/report/transfer/B-nowhere", {}, "").status == 404);
  CHECK(json::parse(svc.handle("GET", "/api/report/transfer/B-nowhere", {}, "").body)
            .contains("error"));
  CHECK(svc.handle("GET", "/api/nothing", {}, "").status == 404);
  CHECK(svc.handle("DELETE", "/api/report", {}, "").status == 404);
}

TEST_CASE("instances pagination") {
  const auto svc = fixture_service(2);
  const auto report = fixture_report();

  SUBCASE("pages reassemble the filtered list") {
    for (const std::string filter : {"all", "errors_only"}) {
      json all = json::array();
      auto first = json::parse(svc.handle("GET", "/api/report/instances", {{"filter", filter}}, "").body);
      const std::size_t pages = first["pages"];
      CHECK(first["page_size"] == 2);
      for (std::size_t p = 1; p <= pages + 1; ++p) {
        auto j = json::parse(svc.handle("GET", "/api/report/instances",
                                        {{"filter", filter}, {"page", std::to_string(p)}}, "")
                                 .body);
        CHECK(j["total"] == first["total"]);
        if (p > pages) CHECK(j["items"].empty());
        for (auto& it : j["items"]) all.push_back(it);
      }
      CHECK(all.size() == first["total"].get<std::size_t>());
      if (filter == "all") CHECK(all == report["instances"]);
      else CHECK(all.size() == 4);
    }
  }

  SUBCASE("query and page size") {
    auto j = json::parse(
        svc.handle("GET", "/api/report/instances", {{"q", "ROCK"}, {"page_size", "10"}}, "").body);
    CHECK(j["total"] == 1);
    CHECK(j["items"][0]["index"] == 4);
    CHECK(j["pages"] == 1);
  }

  SUBCASE("bad parameters") {
    CHECK(svc.handle("GET", "/api/report/instances", {{"filter", "some"}}, "").status == 400);
    CHECK(svc.handle("GET", "/api/report/instances", {{"page", "0"}}, "").status == 400);
    CHECK(svc.handle("GET", "/api/report/instances", {{"page", "x"}}, "").status == 400);
    CHECK(svc.handle("GET", "/api/report/instances", {{"page_size", "-3"}}, "").status == 400);
  }

  SUBCASE("responses are pure") {
    const Query q{{"filter", "errors_only"}, {"page", "2"}};
    const auto a = svc.handle("GET", "/api/report/instances", q, "").body;
    svc.handle("GET", "/api/report/instances", {{"page", "1"}}, "");
    CHECK(svc.handle("GET", "/api/report/instances", q, "").body == a);
  }
}

TEST_CASE("predict without a model") {
  const auto svc = fixture_service();
  CHECK(svc.handle("POST", "/api/predict", {}, R"({"text":["a"]})").status == 503);
}

TEST_CASE("predict with the overfit fixture model") {
  auto svc = service::from_files(overfit_run() / run::files::kReport, overfit_run(),
                                 config::Registry::with_builtins(), {});
  CHECK(json::parse(svc.handle("GET", "/api/report", {}, "").body)["model_loaded"] == true);

  const auto r = svc.handle("POST", "/api/predict", {}, R"({"text":["listen","to","rock","music"]})");
  REQUIRE(r.status == 200);
  const auto j = json::parse(r.body);
  CHECK(j["intent"] == "Listen-to-Music");
  CHECK(j["slots"] == json{"O", "O", "B-music-type", "I-music-type"});
  CHECK(svc.handle("POST", "/api/predict", {}, R"({"text":"listen to rock music"})").body == r.body);

  CHECK(svc.handle("POST", "/api/predict", {}, "nope").status == 400);
  CHECK(svc.handle("POST", "/api/predict", {}, R"({"words":[]})").status == 400);
  CHECK(svc.handle("POST", "/api/predict", {}, R"({"text":[1,2]})").status == 400);
  CHECK(svc.handle("POST", "/api/predict", {}, R"({"text":[]})").status == 400);

  SUBCASE("over a socket") {
    const int port = svc.listen_background();
    httplib::Client cli(svc.options().host, port);

    auto res = cli.Get("/api/report/transfer/B-music-type");
    REQUIRE(res);
    CHECK(res->status == 200);
    CHECK(res->get_header_value("Access-Control-Allow-Origin") == "*");
    CHECK(cli.Get("/api/report/transfer/none")->status == 404);
    CHECK(cli.Get("/api/report/instances?page=abc")->status == 400);
    res = cli.Options("/api/predict");
    REQUIRE(res);
    CHECK(res->status == 204);
    CHECK(res->get_header_value("Access-Control-Allow-Methods").find("POST") != std::string::npos);

    // concurrent predictions give the same answer as the in-process call
    std::vector<std::string> bodies(4);
    std::vector<std::thread> threads;
    for (std::size_t i = 0; i < bodies.size(); ++i)
      threads.emplace_back([&, i] {
        httplib::Client c(svc.options().host, port);
        auto p = c.Post("/api/predict", R"({"text":["listen","to","rock","music"]})",
                        "application/json");
        if (p) bodies[i] = p->body;
      });
    for (auto& t : threads) t.join();
    for (const auto& b : bodies) CHECK(b == r.body);
    svc.stop();
  }
}
