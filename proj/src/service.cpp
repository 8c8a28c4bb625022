#include "slukit/service.hpp"

#include <charconv>
#include <sstream>
#include <thread>

#include <httplib.h>

#include "slukit/batch.hpp"
#include "slukit/error.hpp"

namespace slukit::service {

namespace {

Reply json_reply(int status, const nlohmann::json& j) { return {status, j.dump()}; }

Reply error_reply(int status, const std::string& msg) {
  return json_reply(status, {{"error", msg}});
}

std::optional<std::string> param(const std::multimap<std::string, std::string>& q,
                                 const std::string& key) {
  const auto it = q.find(key);
  if (it == q.end()) return std::nullopt;
  return it->second;
}

std::optional<std::size_t> positive(const std::string& s) {
  std::size_t v = 0;
  const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc() || r.ptr != s.data() + s.size() || v == 0) return std::nullopt;
  return v;
}

bool contains_ci(const std::string& hay, const std::string& needle) {
  return data::to_lower(hay).find(data::to_lower(needle)) != std::string::npos;
}

}  // namespace

struct Service::Server {
  httplib::Server http;
  std::thread thread;
};

Service::Service(nlohmann::json report, std::optional<run::Loaded> model, Options options)
    : report_(std::move(report)), model_(std::move(model)), options_(std::move(options)) {}

Service::~Service() { stop(); }

Reply Service::distribution() const { return json_reply(200, report_.at("error_distribution")); }

Reply Service::transfer(const std::string& label) const {
  const auto& t = report_.at("label_transfer");
  const auto it = t.find(label);
  if (it == t.end()) return error_reply(404, "label '" + label + "' not found in the report");
  return json_reply(200, *it);
}

Reply Service::instances(const std::multimap<std::string, std::string>& query) const {
  const std::string filter = param(query, "filter").value_or("all");
  if (filter != "all" && filter != "errors_only")
    return error_reply(400, "filter must be all or errors_only");
  const std::string q = param(query, "q").value_or("");
  std::size_t page = 1, size = options_.page_size;
  if (auto p = param(query, "page")) {
    auto v = positive(*p);
    if (!v) return error_reply(400, "page must be a positive integer");
    page = *v;
  }
  if (auto p = param(query, "page_size")) {
    auto v = positive(*p);
    if (!v) return error_reply(400, "page_size must be a positive integer");
    size = *v;
  }
  nlohmann::json matched = nlohmann::json::array();
  for (const auto& inst : report_.at("instances")) {
    if (filter == "errors_only") {
      bool err = !inst.at("intent_correct").get<bool>();
      for (const auto& m : inst.at("mismatch")) err = err || m.get<bool>();
      if (!err) continue;
    }
    if (!q.empty()) {
      std::string text;
      for (const auto& t : inst.at("tokens")) text += (text.empty() ? "" : " ") + t.get<std::string>();
      if (!contains_ci(text, q)) continue;
    }
    matched.push_back(inst);
  }
  const std::size_t total = matched.size();
  const std::size_t pages = (total + size - 1) / size;
  nlohmann::json items = nlohmann::json::array();
  for (std::size_t i = (page - 1) * size; i < total && i < page * size; ++i)
    items.push_back(matched[i]);
  nlohmann::ordered_json out{{"total", total}, {"page", page}, {"page_size", size},
                             {"pages", pages}, {"items", items}};
  return {200, out.dump()};
}

Reply Service::predict(const std::string& body) const {
  if (!model_) return error_reply(503, "no model loaded; start the service with a run directory");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(body);
  } catch (const nlohmann::json::exception&) {
    return error_reply(400, "body is not valid JSON");
  }
  std::vector<std::string> tokens;
  if (!j.is_object() || !j.contains("text")) return error_reply(400, "body needs a \"text\" field");
  const auto& t = j["text"];
  if (t.is_string()) {
    tokens = data::split_words(t.get<std::string>());
  } else if (t.is_array()) {
    for (const auto& x : t) {
      if (!x.is_string()) return error_reply(400, "\"text\" must hold strings");
      tokens.push_back(x.get<std::string>());
    }
  } else {
    return error_reply(400, "\"text\" must be a token list or a string");
  }
  if (tokens.empty()) return error_reply(400, "\"text\" is empty");

  data::Utterance u;
  u.text = tokens;
  u.slot.assign(tokens.size(), "O");
  u.intent = {"?"};
  const std::vector<data::Utterance> one{u};
  const auto rec = train::predict(model_->model, model_->vocabs, one, 1).front();
  nlohmann::ordered_json out{{"text", tokens},
                             {"intent", data::join_intents(rec.pred_intent)},
                             {"intents", rec.pred_intent},
                             {"slots", rec.pred_slot}};
  return {200, out.dump()};
}

Reply Service::handle(const std::string& method, const std::string& path,
                      const std::multimap<std::string, std::string>& query,
                      const std::string& body) const {
  static const std::string kTransfer = "/api/report/transfer/";
  try {
    if (method == "GET") {
      if (path == "/healthz") return json_reply(200, {{"status", "ok"}});
      if (path == "/api/report") {
        nlohmann::ordered_json out{{"schema_version", report_.at("schema_version")},
                                   {"summary", report_.value("summary", nlohmann::json::object())},
                                   {"model_loaded", model_.has_value()}};
        return {200, out.dump()};
      }
      if (path == "/api/report/distribution") return distribution();
      if (path == "/api/report/instances") return instances(query);
      if (path.rfind(kTransfer, 0) == 0 && path.size() > kTransfer.size())
        return transfer(path.substr(kTransfer.size()));
    } else if (method == "POST" && path == "/api/predict") {
      return predict(body);
    }
    return error_reply(404, "no route for " + method + " " + path);
  } catch (const std::exception& e) {
    return error_reply(500, e.what());
  }
}

namespace {

void wire(httplib::Server& http, const Service& svc, const std::string& origin) {
  auto forward = [&svc](const httplib::Request& req, httplib::Response& res) {
    std::multimap<std::string, std::string> q(req.params.begin(), req.params.end());
    const Reply r = svc.handle(req.method, req.path, q, req.body);
    res.status = r.status;
    res.set_content(r.body, "application/json; charset=utf-8");
  };
  http.Get(".*", forward);
  http.Post(".*", forward);
  http.Options(".*", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });
  http.set_post_routing_handler([origin](const httplib::Request&, httplib::Response& res) {
    res.set_header("Access-Control-Allow-Origin", origin);
    res.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
    res.set_header("Access-Control-Allow-Headers", "Content-Type");
  });
}

}  // namespace

bool Service::listen() {
  server_ = std::make_unique<Server>();
  wire(server_->http, *this, options_.cors_origin);
  return server_->http.listen(options_.host, options_.port);
}

int Service::listen_background() {
  server_ = std::make_unique<Server>();
  wire(server_->http, *this, options_.cors_origin);
  const int port = server_->http.bind_to_any_port(options_.host);
  if (port < 0) throw Error("service", "cannot bind " + options_.host);
  options_.port = port;
  server_->thread = std::thread([this] { server_->http.listen_after_bind(); });
  server_->http.wait_until_ready();
  return port;
}

void Service::stop() {
  if (!server_) return;
  server_->http.stop();
  if (server_->thread.joinable()) server_->thread.join();
  server_.reset();
}

Service from_files(const std::filesystem::path& report,
                   const std::optional<std::filesystem::path>& run_dir,
                   const config::Registry& registry, Options options) {
  auto j = analysis::parse_report(run::read_text(report));
  std::optional<run::Loaded> model;
  if (run_dir) model.emplace(run::load(*run_dir, registry));
  return Service(std::move(j), std::move(model), std::move(options));
}

}  // namespace slukit::service
