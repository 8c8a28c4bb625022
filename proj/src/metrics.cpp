#include "slukit/metrics.hpp"

#include <algorithm>
#include <map>
#include <set>

#include "slukit/error.hpp"

namespace slukit::metrics {

namespace {

struct Tag {
  char kind;  // 'B', 'I' or 'O'
  std::string type;
};

Tag parse_tag(const std::string& label) {
  if (label.size() > 2 && (label[0] == 'B' || label[0] == 'I') && label[1] == '-')
    return {label[0], label.substr(2)};
  return {'O', {}};
}

template <typename A, typename B>
void require_aligned(const A& a, const B& b, const char* what) {
  if (a.size() != b.size())
    throw ContractError(std::string(what) + ": " + std::to_string(a.size()) + " gold vs " +
                        std::to_string(b.size()) + " predicted utterances");
}

void require_same_length(std::span<const Labels> gold, std::span<const Labels> pred) {
  require_aligned(gold, pred, "slot metrics");
  for (std::size_t i = 0; i < gold.size(); ++i)
    if (gold[i].size() != pred[i].size())
      throw ContractError("slot metrics: utterance " + std::to_string(i) + " has " +
                          std::to_string(gold[i].size()) + " gold and " +
                          std::to_string(pred[i].size()) + " predicted labels");
}

std::vector<std::string> as_set(const IntentSet& s) {
  std::vector<std::string> out(s);
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

double ratio(double num, double den) { return den == 0.0 ? 0.0 : num / den; }

double harmonic(double p, double r) { return p + r == 0.0 ? 0.0 : 2.0 * p * r / (p + r); }

}  // namespace

std::vector<Span> extract_spans(std::span<const std::string> labels) {
  std::vector<Span> out;
  bool open = false;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const Tag tag = parse_tag(labels[i]);
    const int pos = static_cast<int>(i);
    if (tag.kind == 'I' && open && out.back().label == tag.type) {
      out.back().end = pos;
    } else if (tag.kind == 'O') {
      open = false;
    } else {
      out.push_back({tag.type, pos, pos});
      open = true;
    }
  }
  return out;
}

SlotScores slot_f1(std::span<const Labels> gold, std::span<const Labels> pred) {
  require_same_length(gold, pred);
  std::size_t tp = 0, n_gold = 0, n_pred = 0;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    const auto g = extract_spans(gold[i]);
    const auto p = extract_spans(pred[i]);
    n_gold += g.size();
    n_pred += p.size();
    // spans are sorted by start and never share one, so a merge finds matches
    std::size_t a = 0, b = 0;
    while (a < g.size() && b < p.size()) {
      if (g[a].start < p[b].start) {
        ++a;
      } else if (p[b].start < g[a].start) {
        ++b;
      } else {
        if (g[a] == p[b]) ++tp;
        ++a;
        ++b;
      }
    }
  }
  SlotScores s;
  s.precision = ratio(static_cast<double>(tp), static_cast<double>(n_pred));
  s.recall = ratio(static_cast<double>(tp), static_cast<double>(n_gold));
  s.f1 = harmonic(s.precision, s.recall);
  return s;
}

double intent_accuracy(std::span<const IntentSet> gold, std::span<const IntentSet> pred) {
  require_aligned(gold, pred, "intent accuracy");
  if (gold.empty()) return 0.0;
  std::size_t right = 0;
  for (std::size_t i = 0; i < gold.size(); ++i) right += as_set(gold[i]) == as_set(pred[i]);
  return static_cast<double>(right) / static_cast<double>(gold.size());
}

double intent_macro_f1(std::span<const IntentSet> gold, std::span<const IntentSet> pred) {
  require_aligned(gold, pred, "intent macro F1");
  struct Counts {
    std::size_t tp = 0, fp = 0, fn = 0;
  };
  std::map<std::string, Counts> per_label;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    const auto g = as_set(gold[i]), p = as_set(pred[i]);
    for (const auto& l : g)
      (std::binary_search(p.begin(), p.end(), l) ? per_label[l].tp : per_label[l].fn)++;
    for (const auto& l : p)
      if (!std::binary_search(g.begin(), g.end(), l)) per_label[l].fp++;
  }
  if (per_label.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& [label, c] : per_label) {
    const double p = ratio(static_cast<double>(c.tp), static_cast<double>(c.tp + c.fp));
    const double r = ratio(static_cast<double>(c.tp), static_cast<double>(c.tp + c.fn));
    sum += harmonic(p, r);
  }
  return sum / static_cast<double>(per_label.size());
}

double exact_match_accuracy(std::span<const IntentSet> gold_intents,
                            std::span<const IntentSet> pred_intents,
                            std::span<const Labels> gold_slots,
                            std::span<const Labels> pred_slots, SlotMatch match) {
  require_aligned(gold_intents, pred_intents, "exact match");
  require_aligned(gold_intents, gold_slots, "exact match");
  require_same_length(gold_slots, pred_slots);
  if (gold_intents.empty()) return 0.0;
  std::size_t right = 0;
  for (std::size_t i = 0; i < gold_intents.size(); ++i) {
    if (as_set(gold_intents[i]) != as_set(pred_intents[i])) continue;
    const bool slots_ok = match == SlotMatch::kToken
                              ? gold_slots[i] == pred_slots[i]
                              : extract_spans(gold_slots[i]) == extract_spans(pred_slots[i]);
    right += slots_ok;
  }
  return static_cast<double>(right) / static_cast<double>(gold_intents.size());
}

MetricReport compute_report(std::span<const IntentSet> gold_intents,
                            std::span<const IntentSet> pred_intents,
                            std::span<const Labels> gold_slots,
                            std::span<const Labels> pred_slots, SlotMatch match) {
  const SlotScores s = slot_f1(gold_slots, pred_slots);
  MetricReport r;
  r.slot_f1 = s.f1;
  r.slot_precision = s.precision;
  r.slot_recall = s.recall;
  r.intent_accuracy = intent_accuracy(gold_intents, pred_intents);
  r.intent_macro_f1 = intent_macro_f1(gold_intents, pred_intents);
  r.ema = exact_match_accuracy(gold_intents, pred_intents, gold_slots, pred_slots, match);
  return r;
}

nlohmann::ordered_json MetricReport::to_json() const {
  return {{"slot_f1", slot_f1},
          {"slot_precision", slot_precision},
          {"slot_recall", slot_recall},
          {"intent_accuracy", intent_accuracy},
          {"intent_macro_f1", intent_macro_f1},
          {"ema", ema}};
}

MetricReport MetricReport::from_json(const nlohmann::json& j) {
  MetricReport r;
  try {
    r.slot_f1 = j.at("slot_f1").get<double>();
    r.slot_precision = j.at("slot_precision").get<double>();
    r.slot_recall = j.at("slot_recall").get<double>();
    r.intent_accuracy = j.at("intent_accuracy").get<double>();
    r.intent_macro_f1 = j.at("intent_macro_f1").get<double>();
    r.ema = j.at("ema").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("metric report: ") + e.what(), 0);
  }
  return r;
}

SlotMatch parse_slot_match(std::string_view name) {
  if (name == "token") return SlotMatch::kToken;
  if (name == "span") return SlotMatch::kSpan;
  throw ContractError("unknown slot match '" + std::string(name) + "' (expected token or span)");
}

}  // namespace slukit::metrics
