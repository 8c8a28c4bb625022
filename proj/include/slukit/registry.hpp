#pragma once

#include <cstddef>
#include <functional>
#include <map>
#include <memory>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "slukit/decoders.hpp"
#include "slukit/encoders.hpp"
#include "slukit/model.hpp"
#include "slukit/vocab.hpp"

namespace slukit::config {

using Json = nlohmann::json;

inline constexpr const char* kTargetKey = "__model_target__";

enum class ComponentKind { kEncoder, kInteraction, kClassifier };
std::string_view kind_name(ComponentKind kind);

enum class ArgType { kInt, kFloat, kString, kBool };

// A null default means the value is derived during assembly.
struct ArgSpec {
  std::string name;
  ArgType type;
  Json default_value;
  std::vector<std::string> choices = {};  // strings only; empty means any
};

// What a component needs to know about its neighbours.
struct BuildContext {
  std::size_t input_width = 0;  // embedding dim for encoders, stream width otherwise
  std::size_t num_labels = 0;   // classifiers only
  std::size_t num_intents = 0;
  std::mt19937_64* rng = nullptr;
};

using EncoderFactory =
    std::function<std::unique_ptr<nn::Encoder>(const Json& args, const BuildContext&)>;
using InteractionFactory =
    std::function<std::unique_ptr<nn::Interaction>(const Json& args, const BuildContext&)>;
using ClassifierFactory =
    std::function<std::unique_ptr<nn::Classifier>(const Json& args, const BuildContext&)>;

// Flat snake_case key space shared by all component kinds.
class Registry {
 public:
  Registry() = default;
  // The built-in components.
  static Registry with_builtins();

  void add_encoder(const std::string& key, std::vector<ArgSpec> args, EncoderFactory f);
  void add_interaction(const std::string& key, std::vector<ArgSpec> args, InteractionFactory f);
  void add_classifier(const std::string& key, std::vector<ArgSpec> args, ClassifierFactory f);

  bool contains(std::string_view key) const { return entries_.count(std::string(key)) > 0; }
  std::vector<std::string> keys(ComponentKind kind) const;

  // Checks a component node at `path` against the target's argument list and
  // returns it with defaults filled in.
  Json resolve(const Json& node, ComponentKind kind, const std::string& path) const;
  const std::vector<ArgSpec>& args_of(const std::string& key) const;

  std::unique_ptr<nn::Encoder> make_encoder(const Json& node, const BuildContext& ctx,
                                            const std::string& path) const;
  std::unique_ptr<nn::Interaction> make_interaction(const Json& node, const BuildContext& ctx,
                                                    const std::string& path) const;
  std::unique_ptr<nn::Classifier> make_classifier(const Json& node, const BuildContext& ctx,
                                                  const std::string& path) const;

 private:
  struct Entry {
    ComponentKind kind;
    std::vector<ArgSpec> args;
    EncoderFactory encoder;
    InteractionFactory interaction;
    ClassifierFactory classifier;
  };
  void add(const std::string& key, Entry e);
  const Entry& lookup(const Json& node, ComponentKind kind, const std::string& path) const;

  std::map<std::string, Entry> entries_;
};

// Registered keys closest to `key` by edit distance, best first.
std::vector<std::string> nearest_keys(std::string_view key, const std::vector<std::string>& keys,
                                      std::size_t limit = 3);
std::size_t edit_distance(std::string_view a, std::string_view b);

// Builds the joint model from a resolved `model` section. Components are
// constructed in pipeline order from one generator seeded with `seed`.
nn::JointModel build_model(const Json& model, const data::Vocabularies& vocabs,
                           const Registry& registry, std::uint64_t seed);

}  // namespace slukit::config
