#include "slukit/registry.hpp"

#include <algorithm>
#include <numeric>

#include "slukit/error.hpp"
#include "slukit/word_vectors.hpp"

namespace slukit::config {

namespace {

bool is_snake_case(std::string_view key) {
  if (key.empty() || key[0] < 'a' || key[0] > 'z') return false;
  return std::all_of(key.begin(), key.end(), [](char c) {
    return (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '_';
  });
}

std::string join(const std::vector<std::string>& items) {
  std::string out;
  for (const auto& s : items) out += (out.empty() ? "" : ", ") + s;
  return out;
}

bool matches(const Json& v, ArgType t) {
  switch (t) {
    case ArgType::kInt: return v.is_number_integer();
    case ArgType::kFloat: return v.is_number();
    case ArgType::kString: return v.is_string();
    case ArgType::kBool: return v.is_boolean();
  }
  return false;
}

const char* type_name(ArgType t) {
  switch (t) {
    case ArgType::kInt: return "integer";
    case ArgType::kFloat: return "number";
    case ArgType::kString: return "string";
    case ArgType::kBool: return "boolean";
  }
  return "?";
}

std::size_t size_arg(const Json& args, const char* name, std::size_t fallback) {
  const Json& v = args.at(name);
  if (v.is_null()) return fallback;
  return v.get<std::size_t>();
}

ArgSpec int_arg(const char* name, Json def) { return {name, ArgType::kInt, std::move(def)}; }

}  // namespace

std::string_view kind_name(ComponentKind kind) {
  switch (kind) {
    case ComponentKind::kEncoder: return "encoder";
    case ComponentKind::kInteraction: return "interaction";
    case ComponentKind::kClassifier: return "classifier";
  }
  return "?";
}

std::size_t edit_distance(std::string_view a, std::string_view b) {
  std::vector<std::size_t> row(b.size() + 1);
  std::iota(row.begin(), row.end(), std::size_t{0});
  for (std::size_t i = 1; i <= a.size(); ++i) {
    std::size_t diag = row[0];
    row[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const std::size_t up = row[j];
      row[j] = std::min({row[j] + 1, row[j - 1] + 1, diag + (a[i - 1] != b[j - 1])});
      diag = up;
    }
  }
  return row[b.size()];
}

std::vector<std::string> nearest_keys(std::string_view key, const std::vector<std::string>& keys,
                                      std::size_t limit) {
  std::vector<std::pair<std::size_t, std::string>> scored;
  for (const auto& k : keys) scored.emplace_back(edit_distance(key, k), k);
  std::sort(scored.begin(), scored.end());
  std::vector<std::string> out;
  for (std::size_t i = 0; i < scored.size() && i < limit; ++i) out.push_back(scored[i].second);
  return out;
}

void Registry::add(const std::string& key, Entry e) {
  if (!is_snake_case(key))
    throw ContractError("registry key '" + key + "' is not snake_case");
  if (const auto it = entries_.find(key); it != entries_.end())
    throw ContractError("registry key '" + key + "' is already registered as " +
                        std::string(kind_name(it->second.kind)));
  for (const auto& a : e.args)
    if (a.name == kTargetKey)
      throw ContractError("registry key '" + key + "' declares a reserved argument");
  entries_.emplace(key, std::move(e));
}

void Registry::add_encoder(const std::string& key, std::vector<ArgSpec> args,
                           EncoderFactory f) {
  add(key, {ComponentKind::kEncoder, std::move(args), std::move(f), {}, {}});
}

void Registry::add_interaction(const std::string& key, std::vector<ArgSpec> args,
                               InteractionFactory f) {
  add(key, {ComponentKind::kInteraction, std::move(args), {}, std::move(f), {}});
}

void Registry::add_classifier(const std::string& key, std::vector<ArgSpec> args,
                              ClassifierFactory f) {
  add(key, {ComponentKind::kClassifier, std::move(args), {}, {}, std::move(f)});
}

std::vector<std::string> Registry::keys(ComponentKind kind) const {
  std::vector<std::string> out;
  for (const auto& [k, e] : entries_)
    if (e.kind == kind) out.push_back(k);
  return out;
}

const std::vector<ArgSpec>& Registry::args_of(const std::string& key) const {
  const auto it = entries_.find(key);
  if (it == entries_.end()) throw LookupError("registry has no key '" + key + "'");
  return it->second.args;
}

const Registry::Entry& Registry::lookup(const Json& node, ComponentKind kind,
                                        const std::string& path) const {
  if (!node.is_object()) throw ConfigError(path, "expected a mapping with " + std::string(kTargetKey));
  const auto t = node.find(kTargetKey);
  const std::string target_path = path + "." + kTargetKey;
  if (t == node.end()) throw ConfigError(target_path, "missing");
  if (!t->is_string()) throw ConfigError(target_path, "expected a string");
  const std::string key = t->get<std::string>();
  const auto it = entries_.find(key);
  if (it == entries_.end() || it->second.kind != kind) {
    const auto near = nearest_keys(key, keys(kind));
    std::string msg = "unknown " + std::string(kind_name(kind)) + " '" + key + "'";
    if (it != entries_.end()) msg += " (registered as " + std::string(kind_name(it->second.kind)) + ")";
    msg += near.empty() ? "; nothing registered" : "; did you mean: " + join(near);
    throw ConfigError(target_path, msg);
  }
  return it->second;
}

Json Registry::resolve(const Json& node, ComponentKind kind, const std::string& path) const {
  const Entry& e = lookup(node, kind, path);
  Json out = Json::object();
  out[kTargetKey] = node.at(kTargetKey);
  for (const auto& [name, value] : node.items()) {
    if (name == kTargetKey) continue;
    const auto spec = std::find_if(e.args.begin(), e.args.end(),
                                   [&](const ArgSpec& a) { return a.name == name; });
    if (spec == e.args.end()) {
      std::vector<std::string> names;
      for (const auto& a : e.args) names.push_back(a.name);
      throw ConfigError(path + "." + name,
                        "unknown argument for '" + node.at(kTargetKey).get<std::string>() +
                            "'" + (names.empty() ? "; it takes none" : "; expected: " + join(names)));
    }
    const bool optional = spec->default_value.is_null();
    if (!(optional && value.is_null()) && !matches(value, spec->type))
      throw ConfigError(path + "." + name, std::string("expected ") + type_name(spec->type) +
                                               ", got " + value.dump());
    if (!spec->choices.empty() &&
        std::find(spec->choices.begin(), spec->choices.end(), value.get<std::string>()) ==
            spec->choices.end())
      throw ConfigError(path + "." + name, "expected one of: " + join(spec->choices) + ", got " +
                                               value.dump());
    if (spec->type == ArgType::kInt && value.is_number_integer() && value.get<long long>() < 0)
      throw ConfigError(path + "." + name, "must be non-negative");
  }
  for (const auto& a : e.args) {
    const auto v = node.find(a.name);
    Json value = v == node.end() ? a.default_value : *v;
    if (a.type == ArgType::kFloat && value.is_number_integer()) value = value.get<double>();
    out[a.name] = std::move(value);
  }
  return out;
}

std::unique_ptr<nn::Encoder> Registry::make_encoder(const Json& node, const BuildContext& ctx,
                                                    const std::string& path) const {
  const Json args = resolve(node, ComponentKind::kEncoder, path);
  return lookup(node, ComponentKind::kEncoder, path).encoder(args, ctx);
}

std::unique_ptr<nn::Interaction> Registry::make_interaction(const Json& node,
                                                            const BuildContext& ctx,
                                                            const std::string& path) const {
  const Json args = resolve(node, ComponentKind::kInteraction, path);
  return lookup(node, ComponentKind::kInteraction, path).interaction(args, ctx);
}

std::unique_ptr<nn::Classifier> Registry::make_classifier(const Json& node,
                                                          const BuildContext& ctx,
                                                          const std::string& path) const {
  const Json args = resolve(node, ComponentKind::kClassifier, path);
  return lookup(node, ComponentKind::kClassifier, path).classifier(args, ctx);
}

Registry Registry::with_builtins() {
  Registry r;
  r.add_encoder("bilstm", {int_arg("hidden_size", 128), int_arg("input_size", nullptr)},
                [](const Json& a, const BuildContext& c) {
                  return std::make_unique<nn::BiLstmEncoder>(
                      size_arg(a, "input_size", c.input_width), a.at("hidden_size").get<std::size_t>(),
                      *c.rng);
                });
  r.add_encoder("self_attentive",
                {int_arg("hidden_size", 128), int_arg("attention_size", 128),
                 int_arg("input_size", nullptr)},
                [](const Json& a, const BuildContext& c) {
                  return std::make_unique<nn::SelfAttentiveEncoder>(
                      size_arg(a, "input_size", c.input_width), a.at("hidden_size").get<std::size_t>(),
                      a.at("attention_size").get<std::size_t>(), *c.rng);
                });

  r.add_interaction("identity", {}, [](const Json&, const BuildContext&) {
    return std::make_unique<nn::IdentityInteraction>();
  });
  r.add_interaction("single_flow", {}, [](const Json&, const BuildContext& c) {
    return std::make_unique<nn::SingleFlowInteraction>(c.input_width, c.num_intents, *c.rng);
  });
  r.add_interaction("slot_gated", {}, [](const Json&, const BuildContext& c) {
    return std::make_unique<nn::SlotGatedInteraction>(c.input_width, c.input_width, *c.rng);
  });
  r.add_interaction("bidirectional", {int_arg("attention_size", 64)},
                    [](const Json& a, const BuildContext& c) {
                      return std::make_unique<nn::BidirectionalInteraction>(
                          c.input_width, a.at("attention_size").get<std::size_t>(), *c.rng);
                    });

  r.add_classifier("mlp",
                   {int_arg("hidden_size", 128), {"activation", ArgType::kString, "tanh", {"tanh", "sigmoid", "relu"}},
                    int_arg("input_size", nullptr)},
                   [](const Json& a, const BuildContext& c) {
                     const auto act = ad::parse_activation(a.at("activation").get<std::string>());
                     return std::make_unique<nn::MlpClassifier>(
                         size_arg(a, "input_size", c.input_width),
                         a.at("hidden_size").get<std::size_t>(), c.num_labels, act, *c.rng);
                   });
  r.add_classifier("lstm",
                   {int_arg("hidden_size", 128), int_arg("label_dim", 32),
                    int_arg("input_size", nullptr)},
                   [](const Json& a, const BuildContext& c) {
                     return std::make_unique<nn::LstmClassifier>(
                         size_arg(a, "input_size", c.input_width),
                         a.at("hidden_size").get<std::size_t>(), c.num_labels,
                         a.at("label_dim").get<std::size_t>(), *c.rng);
                   });
  return r;
}

namespace {

std::string describe(const Json& node, const char* role) {
  return std::string(role) + " '" + node.at(kTargetKey).get<std::string>() + "'";
}

}  // namespace

nn::JointModel build_model(const Json& model, const data::Vocabularies& vocabs,
                           const Registry& registry, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const Json& emb_cfg = model.at("embedding");
  const std::size_t dim = emb_cfg.at("dim").get<std::size_t>();
  if (dim == 0) throw ConfigError("model.embedding.dim", "must be positive");
  const std::uint64_t emb_seed = rng();
  data::EmbeddingMatrix table;
  if (const Json& wv = emb_cfg.at("word_vectors"); wv.is_string())
    table = data::load_word_vectors(wv.get<std::string>(), vocabs.tokens, dim, emb_seed);
  else
    table = data::random_embeddings(vocabs.tokens.size(), dim, emb_seed);

  nn::JointModel::Parts parts;
  parts.embedding = nn::Embedding(ad::Tensor::from({table.rows, table.dim}, table.values, true));
  parts.dropout = emb_cfg.at("dropout").get<double>();
  if (parts.dropout < 0.0 || parts.dropout >= 1.0)
    throw ConfigError("model.embedding.dropout", "must lie in [0, 1)");
  parts.intent_mode = nn::parse_intent_mode(model.at("intent_mode").get<std::string>());
  parts.threshold = model.at("multi_threshold").get<double>();
  if (parts.intent_mode == nn::IntentMode::kMulti && !vocabs.options.multi_intent)
    throw AssemblyError("intent_mode multi needs data.multi_intent: true");

  const std::size_t num_intents = vocabs.intents.size();
  BuildContext ctx;
  ctx.rng = &rng;
  ctx.input_width = dim;
  ctx.num_intents = num_intents;
  parts.encoder = registry.make_encoder(model.at("encoder"), ctx, "model.encoder");
  const std::string enc = describe(model.at("encoder"), "encoder");
  if (parts.encoder->input_width() != dim)
    throw AssemblyError(enc + " expects input width " +
                        std::to_string(parts.encoder->input_width()) + " but embedding has dim " +
                        std::to_string(dim));

  const std::size_t width = parts.encoder->output_width();
  ctx.input_width = width;
  parts.interaction =
      registry.make_interaction(model.at("interaction"), ctx, "model.interaction");

  auto make_head = [&](const char* key, std::size_t labels) {
    ctx.num_labels = labels;
    auto head = registry.make_classifier(model.at(key), ctx, std::string("model.") + key);
    const std::string who = describe(model.at(key), key);
    if (head->input_width() != width)
      throw AssemblyError(who + " expects input width " + std::to_string(head->input_width()) +
                          " but " + enc + " produces " + std::to_string(width));
    if (head->num_labels() != labels)
      throw AssemblyError(who + " predicts " + std::to_string(head->num_labels()) +
                          " labels but the vocabulary has " + std::to_string(labels));
    return head;
  };
  parts.intent_classifier = make_head("intent_classifier", num_intents);
  parts.slot_classifier = make_head("slot_classifier", vocabs.slots.size());
  if (parts.intent_classifier->needs_sequence() && parts.intent_mode != nn::IntentMode::kToken)
    throw AssemblyError(describe(model.at("intent_classifier"), "intent_classifier") +
                        " decodes a sequence; it needs intent_mode token, not " +
                        std::string(nn::intent_mode_name(parts.intent_mode)));
  return nn::JointModel(std::move(parts));
}

}  // namespace slukit::config
