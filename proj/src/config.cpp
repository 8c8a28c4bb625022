#include "slukit/config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <regex>
#include <sstream>

#include <yaml-cpp/yaml.h>

#include "slukit/error.hpp"

namespace slukit::config {

namespace {

struct Field {
  std::string path;
  ArgType type;
  Json default_value;
  bool nullable = false;
  std::vector<std::string> choices = {};
};

// Fixed-schema leaves. Component nodes are checked by the registry instead.
const std::vector<Field>& fields() {
  static const std::vector<Field> f{
      {"data.name", ArgType::kString, "atis"},
      {"data.root", ArgType::kString, "data"},
      {"data.format", ArgType::kString, "jsonl", false, {"jsonl", "triple"}},
      {"data.lowercase", ArgType::kBool, true},
      {"data.min_freq", ArgType::kInt, 1},
      {"data.multi_intent", ArgType::kBool, false},
      {"data.train_limit", ArgType::kInt, 0},
      {"data.train_split", ArgType::kString, "train"},
      {"data.dev_split", ArgType::kString, "dev"},
      {"data.test_split", ArgType::kString, "test"},
      {"model.embedding.dim", ArgType::kInt, 64},
      {"model.embedding.dropout", ArgType::kFloat, 0.0},
      {"model.embedding.word_vectors", ArgType::kString, nullptr, true},
      {"model.intent_mode", ArgType::kString, "sentence", false, {"sentence", "token", "multi"}},
      {"model.multi_threshold", ArgType::kFloat, 0.5},
      {"trainer.epochs", ArgType::kInt, 50},
      {"trainer.batch_size", ArgType::kInt, 16},
      {"trainer.learning_rate", ArgType::kFloat, 1e-3},
      {"trainer.loss_weights.intent", ArgType::kFloat, 1.0},
      {"trainer.loss_weights.slot", ArgType::kFloat, 1.0},
      {"trainer.early_stop_patience", ArgType::kInt, 10},
      {"trainer.seed", ArgType::kInt, 42},
      {"trainer.device", ArgType::kString, "cpu"},
      {"trainer.slot_match", ArgType::kString, "token", false, {"token", "span"}},
      {"trainer.grad_clip", ArgType::kFloat, 5.0},
      {"trainer.eval_split", ArgType::kString, "test"},
      {"service.host", ArgType::kString, "127.0.0.1"},
      {"service.port", ArgType::kInt, 8000},
      {"service.page_size", ArgType::kInt, 50},
  };
  return f;
}

struct ComponentSlot {
  const char* key;
  ComponentKind kind;
  const char* default_target;
};

const std::vector<ComponentSlot>& component_slots() {
  static const std::vector<ComponentSlot> s{
      {"encoder", ComponentKind::kEncoder, "bilstm"},
      {"interaction", ComponentKind::kInteraction, "identity"},
      {"intent_classifier", ComponentKind::kClassifier, "mlp"},
      {"slot_classifier", ComponentKind::kClassifier, "mlp"},
  };
  return s;
}

std::vector<std::string> split_path(std::string_view path) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto dot = path.find('.', start);
    out.emplace_back(path.substr(start, dot - start));
    if (dot == std::string_view::npos) break;
    start = dot + 1;
  }
  return out;
}

std::string join(const std::vector<std::string>& items) {
  std::string out;
  for (const auto& s : items) out += (out.empty() ? "" : ", ") + s;
  return out;
}

bool is_component(const Json& node) { return node.is_object() && node.contains(kTargetKey); }

// `over` wins. A component node naming a different target replaces the base
// node instead of merging into it.
void merge_into(Json& base, const Json& over) {
  for (const auto& [k, v] : over.items()) {
    auto it = base.find(k);
    if (it == base.end() || !it->is_object() || !v.is_object()) {
      base[k] = v;
    } else if (is_component(v) && is_component(*it) && (*it)[kTargetKey] != v[kTargetKey]) {
      base[k] = v;
    } else {
      merge_into(*it, v);
    }
  }
}

// Plain YAML scalar to JSON.
Json plain_scalar(const std::string& s) {
  if (s.empty() || s == "~" || s == "null" || s == "Null" || s == "NULL") return nullptr;
  if (s == "true" || s == "True" || s == "TRUE") return true;
  if (s == "false" || s == "False" || s == "FALSE") return false;
  static const std::regex int_re(R"([-+]?[0-9]+)");
  static const std::regex float_re(
      R"([-+]?(\.[0-9]+|[0-9]+(\.[0-9]*)?)([eE][-+]?[0-9]+)?)");
  if (std::regex_match(s, int_re)) {
    long long v = 0;
    const char* b = s.data() + (s[0] == '+');
    const auto r = std::from_chars(b, s.data() + s.size(), v);
    if (r.ec == std::errc()) return v;
  }
  if (std::regex_match(s, float_re)) {
    double v = 0;
    const char* b = s.data() + (s[0] == '+');
    const auto r = std::from_chars(b, s.data() + s.size(), v);
    if (r.ec == std::errc()) return v;
  }
  if (s == ".inf" || s == "+.inf") return std::numeric_limits<double>::infinity();
  if (s == "-.inf") return -std::numeric_limits<double>::infinity();
  return s;
}

Json to_json(const YAML::Node& n) {
  switch (n.Type()) {
    case YAML::NodeType::Null:
    case YAML::NodeType::Undefined: return nullptr;
    case YAML::NodeType::Scalar:
      return n.Tag() == "!" ? Json(n.Scalar()) : plain_scalar(n.Scalar());
    case YAML::NodeType::Sequence: {
      Json out = Json::array();
      for (const auto& c : n) out.push_back(to_json(c));
      return out;
    }
    case YAML::NodeType::Map: {
      Json out = Json::object();
      for (const auto& kv : n) out[kv.first.as<std::string>()] = to_json(kv.second);
      return out;
    }
  }
  return nullptr;
}

std::string format_double(double v) {
  if (std::isinf(v)) return v > 0 ? ".inf" : "-.inf";
  if (std::isnan(v)) return ".nan";
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  std::string s(buf, r.ptr);
  if (s.find_first_of(".e") == std::string::npos) s += ".0";
  return s;
}

void emit(YAML::Emitter& out, const Json& j) {
  switch (j.type()) {
    case Json::value_t::object:
      out << YAML::BeginMap;
      for (const auto& [k, v] : j.items()) {
        out << YAML::Key << YAML::DoubleQuoted << k << YAML::Value;
        emit(out, v);
      }
      out << YAML::EndMap;
      break;
    case Json::value_t::array:
      out << YAML::BeginSeq;
      for (const auto& v : j) emit(out, v);
      out << YAML::EndSeq;
      break;
    case Json::value_t::string: out << YAML::DoubleQuoted << j.get<std::string>(); break;
    case Json::value_t::boolean: out << (j.get<bool>() ? "true" : "false"); break;
    case Json::value_t::number_integer: out << std::to_string(j.get<long long>()); break;
    case Json::value_t::number_unsigned: out << std::to_string(j.get<unsigned long long>()); break;
    case Json::value_t::number_float: out << format_double(j.get<double>()); break;
    default: out << YAML::Null; break;
  }
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

bool matches(const Json& v, ArgType t) {
  switch (t) {
    case ArgType::kInt: return v.is_number_integer();
    case ArgType::kFloat: return v.is_number();
    case ArgType::kString: return v.is_string();
    case ArgType::kBool: return v.is_boolean();
  }
  return false;
}

const Field* find_field(const std::string& path) {
  for (const auto& f : fields())
    if (f.path == path) return &f;
  return nullptr;
}

// Dotted prefixes of the fixed schema that are mappings.
std::vector<std::string> object_paths() {
  std::vector<std::string> out;
  for (const auto& f : fields()) {
    auto parts = split_path(f.path);
    std::string p;
    for (std::size_t i = 0; i + 1 < parts.size(); ++i) {
      p += (i ? "." : "") + parts[i];
      if (std::find(out.begin(), out.end(), p) == out.end()) out.push_back(p);
    }
  }
  return out;
}

std::vector<std::string> children_of(const std::string& prefix) {
  std::vector<std::string> out;
  auto add = [&](const std::string& name) {
    if (std::find(out.begin(), out.end(), name) == out.end()) out.push_back(name);
  };
  const std::string head = prefix + ".";
  for (const auto& f : fields())
    if (f.path.rfind(head, 0) == 0) add(split_path(f.path.substr(head.size()))[0]);
  if (prefix == "model")
    for (const auto& c : component_slots()) add(c.key);
  return out;
}

void validate_object(const Json& node, const std::string& path) {
  if (!node.is_object()) throw ConfigError(path, "expected a mapping");
  const auto valid = children_of(path);
  for (const auto& [k, v] : node.items())
    if (std::find(valid.begin(), valid.end(), k) == valid.end())
      throw ConfigError(path + "." + k, "unknown key; valid keys: " + join(valid));
}

Json* walk(Json& tree, const std::vector<std::string>& parts, std::size_t upto) {
  Json* node = &tree;
  for (std::size_t i = 0; i < upto; ++i) {
    if (!node->is_object()) return nullptr;
    auto it = node->find(parts[i]);
    if (it == node->end()) return nullptr;
    node = &*it;
  }
  return node;
}

}  // namespace

std::filesystem::path DataConfig::split_path(const std::string& split) const {
  return format == "jsonl" ? dir() / (split + ".jsonl") : dir() / split;
}

const std::vector<std::string>& section_names() {
  static const std::vector<std::string> s{"data", "model", "trainer", "service", "include"};
  return s;
}

Json defaults() {
  Json out = Json::object();
  for (const auto& f : fields()) {
    Json* node = &out;
    for (const auto& p : split_path(f.path)) node = &(*node)[p];
    *node = f.default_value;
  }
  for (const auto& c : component_slots()) out["model"][c.key] = {{kTargetKey, c.default_target}};
  return out;
}

Json parse_yaml(const std::string& text, const std::string& source) {
  try {
    return to_json(YAML::Load(text));
  } catch (const YAML::Exception& e) {
    throw ConfigError("", source + ": line " + std::to_string(e.mark.line + 1) + ": " + e.msg);
  }
}

Json read_yaml_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("", "cannot read config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_yaml(ss.str(), path.string());
}

std::string to_yaml(const Json& tree) {
  YAML::Emitter out;
  emit(out, tree);
  return std::string(out.c_str()) + "\n";
}

Json load_tree(const std::filesystem::path& path) {
  Json tree = read_yaml_file(path);
  if (tree.is_null()) tree = Json::object();
  if (!tree.is_object()) throw ConfigError("", path.string() + ": top level must be a mapping");
  const auto inc = tree.find("include");
  if (inc == tree.end()) return tree;
  if (!inc->is_string()) throw ConfigError("include", "expected a file path string");
  const auto base_path = path.parent_path() / inc->get<std::string>();
  Json base = read_yaml_file(base_path);
  if (base.is_null()) base = Json::object();
  if (!base.is_object())
    throw ConfigError("include", base_path.string() + ": top level must be a mapping");
  if (base.contains("include"))
    throw ConfigError("include", base_path.string() +
                                     " includes another file; only one include level is supported");
  tree.erase("include");
  merge_into(base, tree);
  return base;
}

void apply_override(Json& tree, std::string_view assignment, const Registry& registry) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos || eq == 0)
    throw ConfigError("", "override '" + std::string(assignment) + "' is not key=value");
  const std::string key(assignment.substr(0, eq));
  const std::string raw(assignment.substr(eq + 1));
  const auto parts = split_path(key);
  for (const auto& p : parts)
    if (p.empty()) throw ConfigError(key, "empty path segment");

  Json* parent = walk(tree, parts, parts.size() - 1);
  if (!parent || !parent->is_object()) {
    // find the deepest existing prefix for the message
    std::size_t ok = 0;
    while (ok + 1 < parts.size() && walk(tree, parts, ok + 1) && walk(tree, parts, ok + 1)->is_object())
      ++ok;
    std::string at;
    for (std::size_t i = 0; i <= ok; ++i) at += (i ? "." : "") + parts[i];
    throw ConfigError(key, "no mapping at '" + at + "'");
  }
  Json value = parse_yaml(raw, "--set " + key);
  const std::string& leaf = parts.back();
  const auto it = parent->find(leaf);
  if (it != parent->end()) {
    const Json& old = *it;
    const Field* field = find_field(key);
    if (old.is_string() || (field && field->type == ArgType::kString)) {
      if (value.is_null() && field && field->nullable) {
      } else if (!value.is_string() && !value.is_object() && !value.is_array()) {
        value = raw;  // a plain scalar given where a string lives
      }
    }
    const bool numeric_ok = old.is_number_float() && value.is_number();
    const bool null_ok = old.is_null() || value.is_null();
    if (!numeric_ok && !null_ok && old.type() != value.type() &&
        !(old.is_number_integer() && value.is_number_integer()))
      throw ConfigError(key, "expected " + std::string(old.type_name()) + ", got " +
                                 std::string(value.type_name()) + " '" + raw + "'");
    if (old.is_number_float() && value.is_number_integer()) value = value.get<double>();
  }
  if (leaf == kTargetKey && value.is_string() && registry.contains(value.get<std::string>())) {
    // drop arguments the new target does not take
    const auto& args = registry.args_of(value.get<std::string>());
    for (auto a = parent->begin(); a != parent->end();) {
      const bool keep = a.key() == kTargetKey ||
                        std::any_of(args.begin(), args.end(),
                                    [&](const ArgSpec& s) { return s.name == a.key(); });
      a = keep ? std::next(a) : parent->erase(a);
    }
  }
  (*parent)[leaf] = std::move(value);
}

Json resolve(const Json& raw, std::span<const std::string> overrides, const Registry& registry) {
  if (!raw.is_object()) throw ConfigError("", "top level must be a mapping");
  for (const auto& [k, v] : raw.items())
    if (std::find(section_names().begin(), section_names().end(), k) == section_names().end())
      throw ConfigError(k, "unknown section; valid sections: " + join(section_names()));
  if (raw.contains("include"))
    throw ConfigError("include", "includes are followed when loading a file, not here");

  Json tree = defaults();
  merge_into(tree, raw);
  for (const auto& o : overrides) apply_override(tree, o, registry);

  for (const auto& [k, v] : tree.items())
    if (std::find(section_names().begin(), section_names().end(), k) == section_names().end())
      throw ConfigError(k, "unknown section; valid sections: " + join(section_names()));
  for (const auto& p : object_paths()) {
    const auto parts = split_path(p);
    const Json* node = walk(tree, parts, parts.size());
    validate_object(*node, p);
  }
  for (const auto& f : fields()) {
    const auto parts = split_path(f.path);
    Json& v = *walk(tree, parts, parts.size());
    if (f.nullable && v.is_null()) continue;
    if (!matches(v, f.type))
      throw ConfigError(f.path, "expected " + std::string(type_name(f.type)) + ", got " + v.dump());
    if (f.type == ArgType::kFloat) v = v.get<double>();
    if (f.type == ArgType::kInt && v.get<long long>() < 0)
      throw ConfigError(f.path, "must be non-negative");
    if (!f.choices.empty() &&
        std::find(f.choices.begin(), f.choices.end(), v.get<std::string>()) == f.choices.end())
      throw ConfigError(f.path, "expected one of: " + join(f.choices) + ", got " + v.dump());
  }
  for (const auto& c : component_slots())
    tree["model"][c.key] =
        registry.resolve(tree["model"][c.key], c.kind, std::string("model.") + c.key);

  const Json& t = tree["trainer"];
  if (t["epochs"].get<long long>() < 1) throw ConfigError("trainer.epochs", "must be at least 1");
  if (t["batch_size"].get<long long>() < 1)
    throw ConfigError("trainer.batch_size", "must be at least 1");
  const double wi = t["loss_weights"]["intent"], ws = t["loss_weights"]["slot"];
  if (wi < 0 || ws < 0) throw ConfigError("trainer.loss_weights", "weights must be non-negative");
  if (wi == 0 && ws == 0) throw ConfigError("trainer.loss_weights", "weights are both zero");
  if (t["learning_rate"].get<double>() <= 0)
    throw ConfigError("trainer.learning_rate", "must be positive");
  if (tree["data"]["min_freq"].get<long long>() < 1)
    throw ConfigError("data.min_freq", "must be at least 1");
  const long long port = tree["service"]["port"];
  if (port < 1 || port > 65535) throw ConfigError("service.port", "must be in 1..65535");
  if (tree["service"]["page_size"].get<long long>() < 1)
    throw ConfigError("service.page_size", "must be at least 1");
  const double tau = tree["model"]["multi_threshold"];
  if (tau < 0 || tau > 1) throw ConfigError("model.multi_threshold", "must lie in [0, 1]");
  return tree;
}

Config from_tree(Json resolved) {
  Config c;
  const Json& d = resolved.at("data");
  c.data.name = d.at("name");
  c.data.root = d.at("root");
  c.data.format = d.at("format");
  c.data.lowercase = d.at("lowercase");
  c.data.min_freq = d.at("min_freq");
  c.data.multi_intent = d.at("multi_intent");
  c.data.train_limit = d.at("train_limit");
  c.data.train_split = d.at("train_split");
  c.data.dev_split = d.at("dev_split");
  c.data.test_split = d.at("test_split");
  const Json& t = resolved.at("trainer");
  c.trainer.epochs = t.at("epochs");
  c.trainer.batch_size = t.at("batch_size");
  c.trainer.learning_rate = t.at("learning_rate");
  c.trainer.intent_weight = t.at("loss_weights").at("intent");
  c.trainer.slot_weight = t.at("loss_weights").at("slot");
  c.trainer.early_stop_patience = t.at("early_stop_patience");
  c.trainer.seed = t.at("seed");
  c.trainer.device = t.at("device");
  c.trainer.slot_match = t.at("slot_match");
  c.trainer.grad_clip = t.at("grad_clip");
  c.trainer.eval_split = t.at("eval_split");
  const Json& s = resolved.at("service");
  c.service.host = s.at("host");
  c.service.port = s.at("port");
  c.service.page_size = s.at("page_size");
  c.tree = std::move(resolved);
  return c;
}

Config load_config(const std::filesystem::path& path, std::span<const std::string> overrides,
                   const Registry& registry) {
  return from_tree(resolve(load_tree(path), overrides, registry));
}

Config default_config(std::span<const std::string> overrides, const Registry& registry) {
  return from_tree(resolve(Json::object(), overrides, registry));
}

}  // namespace slukit::config
