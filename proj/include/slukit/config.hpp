#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "slukit/registry.hpp"

namespace slukit::config {

struct DataConfig {
  std::string name;  // directory under root
  std::string root;
  std::string format;  // jsonl | triple
  bool lowercase = true;
  std::size_t min_freq = 1;
  bool multi_intent = false;
  std::size_t train_limit = 0;  // 0 keeps every training utterance
  std::string train_split, dev_split, test_split;

  std::filesystem::path dir() const { return std::filesystem::path(root) / name; }
  // data/<name>/<split>.jsonl, or the directory data/<name>/<split> for triple files.
  std::filesystem::path split_path(const std::string& split) const;
};

struct TrainerConfig {
  std::size_t epochs = 0;
  std::size_t batch_size = 0;
  double learning_rate = 0.0;
  double intent_weight = 1.0;
  double slot_weight = 1.0;
  std::size_t early_stop_patience = 0;  // 0 disables early stopping
  std::uint64_t seed = 0;
  std::string device;
  std::string slot_match;  // token | span, used by the exact-match metric
  double grad_clip = 0.0;  // global norm; 0 disables
  std::string eval_split;
};

struct ServiceConfig {
  std::string host;
  std::size_t port = 8000;
  std::size_t page_size = 50;
};

struct Config {
  Json tree;  // fully resolved, defaults included
  DataConfig data;
  TrainerConfig trainer;
  ServiceConfig service;
  const Json& model() const { return tree.at("model"); }
};

// Top-level keys a config file may use.
const std::vector<std::string>& section_names();
Json defaults();

// YAML text to JSON. Plain scalars become null, booleans or numbers when they
// read as such; quoted scalars stay strings.
Json parse_yaml(const std::string& text, const std::string& source = "<string>");
Json read_yaml_file(const std::filesystem::path& path);
std::string to_yaml(const Json& tree);

// Reads `path`, follows one `include` level (relative to the file), then
// resolves as below.
Json load_tree(const std::filesystem::path& path);

// `key.path=value`. The value is read as a YAML scalar and must match the
// type already at that key.
void apply_override(Json& tree, std::string_view assignment, const Registry& registry);

// Merges defaults under `raw`, applies overrides in order, validates every
// section and fills component defaults.
Json resolve(const Json& raw, std::span<const std::string> overrides, const Registry& registry);

Config from_tree(Json resolved);
Config load_config(const std::filesystem::path& path, std::span<const std::string> overrides,
                   const Registry& registry);
// Built-in defaults plus overrides, no file.
Config default_config(std::span<const std::string> overrides, const Registry& registry);

}  // namespace slukit::config
