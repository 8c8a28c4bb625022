#pragma once

#include <atomic>
#include <map>
#include <memory>
#include <optional>
#include <string>

#include <json.hpp>

#include "slukit/run.hpp"

namespace slukit::service {

struct Options {
  std::string host = "127.0.0.1";
  int port = 8000;
  std::size_t page_size = 50;
  std::string cors_origin = "*";
};

struct Reply {
  int status = 200;
  std::string body;  // JSON
};

// Read-only view over one report plus an optional model for /api/predict.
class Service {
 public:
  Service(nlohmann::json report, std::optional<run::Loaded> model, Options options);

  // Routes one request. `path` is already URL-decoded.
  Reply handle(const std::string& method, const std::string& path,
               const std::multimap<std::string, std::string>& query,
               const std::string& body) const;

  // Blocks until stop(). Returns false when the port cannot be bound.
  bool listen();
  // Binds an ephemeral port on the configured host, returns it, and serves
  // on a background thread.
  int listen_background();
  void stop();
  ~Service();

  const Options& options() const { return options_; }

 private:
  Reply distribution() const;
  Reply transfer(const std::string& label) const;
  Reply instances(const std::multimap<std::string, std::string>& query) const;
  Reply predict(const std::string& body) const;

  struct Server;
  nlohmann::json report_;
  std::optional<run::Loaded> model_;
  Options options_;
  std::unique_ptr<Server> server_;
};

Service from_files(const std::filesystem::path& report,
                   const std::optional<std::filesystem::path>& run_dir,
                   const config::Registry& registry, Options options);

}  // namespace slukit::service
