#include "slukit/analysis.hpp"

#include <algorithm>
#include <cmath>

#include "slukit/data.hpp"
#include "slukit/error.hpp"
#include "slukit/vocab.hpp"

namespace slukit::analysis {

namespace {

std::vector<std::string> sorted(std::vector<std::string> v) {
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
  return v;
}

bool intent_ok(const data::PredictionRecord& r) {
  return sorted(r.golden_intent) == sorted(r.pred_intent);
}

double ratio(std::size_t a, std::size_t b) {
  return b == 0 ? 0.0 : static_cast<double>(a) / static_cast<double>(b);
}

struct Tally {
  std::size_t occurrences = 0;
  std::map<std::string, std::size_t> wrong;  // predicted label -> count
  std::size_t errors() const {
    std::size_t n = 0;
    for (const auto& [k, v] : wrong) n += v;
    return n;
  }
};

struct Tallies {
  std::map<std::string, Tally> slots, intents;
};

Tallies tally(const std::vector<data::PredictionRecord>& records) {
  Tallies t;
  for (const auto& r : records) {
    for (std::size_t i = 0; i < r.golden_slot.size(); ++i) {
      auto& s = t.slots[r.golden_slot[i]];
      ++s.occurrences;
      if (r.pred_slot[i] != r.golden_slot[i]) ++s.wrong[r.pred_slot[i]];
    }
    auto& s = t.intents[data::join_intents(r.golden_intent)];
    ++s.occurrences;
    if (!intent_ok(r)) ++s.wrong[data::join_intents(r.pred_intent)];
  }
  return t;
}

Transfer make_transfer(const std::string& label, LabelKind kind, const Tally& t) {
  Transfer out;
  out.label = label;
  out.kind = kind;
  out.occurrences = t.occurrences;
  out.errors = t.errors();
  out.wrong_rate = ratio(out.errors, out.occurrences);
  for (const auto& [pred, n] : t.wrong) out.targets.push_back({pred, n, ratio(n, out.errors)});
  std::stable_sort(out.targets.begin(), out.targets.end(),
                   [](const TransferTarget& a, const TransferTarget& b) { return a.count > b.count; });
  return out;
}

std::string lowered_text(const std::vector<std::string>& tokens) {
  std::string s;
  for (const auto& t : tokens) s += (s.empty() ? "" : " ") + t;
  return data::to_lower(s);
}

nlohmann::ordered_json string_list(const std::vector<std::string>& v) {
  return nlohmann::ordered_json(v);
}

}  // namespace

std::string_view kind_name(LabelKind kind) {
  return kind == LabelKind::kSlot ? "slot" : "intent";
}

bool Instance::has_error() const {
  return !intent_correct || std::find(mismatch.begin(), mismatch.end(), true) != mismatch.end();
}

InstanceFilter parse_instance_filter(std::string_view name) {
  if (name == "all" || name.empty()) return InstanceFilter::kAll;
  if (name == "errors_only") return InstanceFilter::kErrorsOnly;
  throw ContractError("unknown instance filter '" + std::string(name) +
                      "' (expected all or errors_only)");
}

double percent(double share) { return std::round(share * 1000.0) / 10.0; }

std::vector<ErrorBucket> error_distribution(const std::vector<data::PredictionRecord>& records) {
  const Tallies t = tally(records);
  std::vector<ErrorBucket> out;
  std::size_t total = 0;
  for (const auto& [label, s] : t.slots)
    if (const auto n = s.errors()) {
      out.push_back({label, LabelKind::kSlot, n, 0.0});
      total += n;
    }
  for (const auto& [label, s] : t.intents)
    if (const auto n = s.errors()) {
      out.push_back({label, LabelKind::kIntent, n, 0.0});
      total += n;
    }
  for (auto& b : out) b.share = ratio(b.count, total);
  std::stable_sort(out.begin(), out.end(), [](const ErrorBucket& a, const ErrorBucket& b) {
    if (a.count != b.count) return a.count > b.count;
    return a.kind < b.kind;
  });
  return out;
}

Transfer label_transfer(const std::vector<data::PredictionRecord>& records,
                        const std::string& label) {
  const Tallies t = tally(records);
  if (const auto it = t.slots.find(label); it != t.slots.end())
    return make_transfer(label, LabelKind::kSlot, it->second);
  if (const auto it = t.intents.find(label); it != t.intents.end())
    return make_transfer(label, LabelKind::kIntent, it->second);
  throw LookupError("label '" + label + "' does not occur in the gold annotations");
}

std::vector<Instance> build_instances(const std::vector<data::PredictionRecord>& records,
                                      InstanceFilter filter, const std::string& query) {
  std::vector<Instance> all;
  all.reserve(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    Instance in;
    in.index = i;
    in.tokens = r.text;
    in.gold_slots = r.golden_slot;
    in.pred_slots = r.pred_slot;
    in.gold_intent = r.golden_intent;
    in.pred_intent = r.pred_intent;
    for (std::size_t k = 0; k < r.golden_slot.size(); ++k)
      in.mismatch.push_back(r.golden_slot[k] != r.pred_slot[k]);
    in.intent_correct = intent_ok(r);
    all.push_back(std::move(in));
  }
  return filter_instances(all, filter, query);
}

std::vector<Instance> filter_instances(const std::vector<Instance>& all, InstanceFilter filter,
                                       const std::string& query) {
  const std::string q = data::to_lower(query);
  std::vector<Instance> out;
  for (const auto& in : all) {
    if (filter == InstanceFilter::kErrorsOnly && !in.has_error()) continue;
    if (!q.empty() && lowered_text(in.tokens).find(q) == std::string::npos) continue;
    out.push_back(in);
  }
  return out;
}

nlohmann::ordered_json to_json(const ErrorBucket& b) {
  return {{"label", b.label},
          {"kind", kind_name(b.kind)},
          {"count", b.count},
          {"percent", percent(b.share)}};
}

nlohmann::ordered_json to_json(const Transfer& t) {
  nlohmann::ordered_json targets = nlohmann::ordered_json::array();
  for (const auto& x : t.targets)
    targets.push_back({{"predicted", x.predicted}, {"count", x.count}, {"percent", percent(x.share)}});
  return {{"label", t.label},
          {"kind", kind_name(t.kind)},
          {"occurrences", t.occurrences},
          {"errors", t.errors},
          {"wrong_rate_percent", percent(t.wrong_rate)},
          {"transfer", targets}};
}

nlohmann::ordered_json to_json(const Instance& i) {
  return {{"index", i.index},
          {"tokens", string_list(i.tokens)},
          {"gold_slots", string_list(i.gold_slots)},
          {"pred_slots", string_list(i.pred_slots)},
          {"gold_intent", string_list(i.gold_intent)},
          {"pred_intent", string_list(i.pred_intent)},
          {"mismatch", i.mismatch},
          {"intent_correct", i.intent_correct}};
}

Report build_report(const std::vector<data::PredictionRecord>& records) {
  Report r;
  r.utterances = records.size();
  for (const auto& p : records) r.tokens += p.text.size();
  r.distribution = error_distribution(records);
  const Tallies t = tally(records);
  for (const auto& [label, s] : t.intents)
    r.transfer[label] = make_transfer(label, LabelKind::kIntent, s);
  // slot labels win a name clash with an intent
  for (const auto& [label, s] : t.slots) r.transfer[label] = make_transfer(label, LabelKind::kSlot, s);
  r.instances = build_instances(records);
  return r;
}

nlohmann::ordered_json to_json(const Report& r) {
  std::size_t slot_errors = 0, intent_errors = 0;
  nlohmann::ordered_json dist = nlohmann::ordered_json::array();
  for (const auto& b : r.distribution) {
    (b.kind == LabelKind::kSlot ? slot_errors : intent_errors) += b.count;
    dist.push_back(to_json(b));
  }
  nlohmann::ordered_json transfer = nlohmann::ordered_json::object();
  for (const auto& [label, t] : r.transfer) transfer[label] = to_json(t);
  nlohmann::ordered_json inst = nlohmann::ordered_json::array();
  for (const auto& i : r.instances) inst.push_back(to_json(i));
  return {{"schema_version", kSchemaVersion},
          {"summary",
           {{"utterances", r.utterances},
            {"tokens", r.tokens},
            {"slot_errors", slot_errors},
            {"intent_errors", intent_errors}}},
          {"error_distribution", dist},
          {"label_transfer", transfer},
          {"instances", inst}};
}

std::string serialize(const Report& r) { return to_json(r).dump(1) + "\n"; }

nlohmann::json parse_report(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("report: ") + e.what(), 0);
  }
  auto require = [&](bool ok, const std::string& what) {
    if (!ok) throw ParseError("report: " + what, 0);
  };
  require(j.is_object(), "top level must be an object");
  require(j.contains("schema_version") && j["schema_version"] == kSchemaVersion,
          "schema_version must be " + std::to_string(kSchemaVersion));
  require(j.contains("error_distribution") && j["error_distribution"].is_array(),
          "error_distribution must be an array");
  require(j.contains("label_transfer") && j["label_transfer"].is_object(),
          "label_transfer must be an object");
  require(j.contains("instances") && j["instances"].is_array(), "instances must be an array");
  for (const auto& i : j["instances"])
    require(i.is_object() && i.contains("tokens") && i.contains("mismatch") &&
                i.contains("intent_correct") && i["tokens"].size() == i["mismatch"].size(),
            "malformed instance");
  return j;
}

}  // namespace slukit::analysis
