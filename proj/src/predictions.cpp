#include "slukit/predictions.hpp"

#include <fstream>

#include "slukit/data.hpp"
#include "slukit/error.hpp"

namespace slukit::data {

namespace {

std::vector<std::string> intent_field(const nlohmann::json& j, const char* key) {
  const auto& v = j.at(key);
  if (v.is_string()) return split_intents(v.get<std::string>());
  return v.get<std::vector<std::string>>();
}

}  // namespace

nlohmann::ordered_json to_json(const PredictionRecord& r) {
  return {{"text", r.text},
          {"golden_intent", join_intents(r.golden_intent)},
          {"golden_slot", r.golden_slot},
          {"pred_intent", join_intents(r.pred_intent)},
          {"pred_slot", r.pred_slot}};
}

std::vector<PredictionRecord> read_predictions(std::istream& in) {
  std::vector<PredictionRecord> out;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      PredictionRecord r;
      r.text = j.at("text").get<std::vector<std::string>>();
      r.golden_intent = intent_field(j, "golden_intent");
      r.golden_slot = j.at("golden_slot").get<std::vector<std::string>>();
      r.pred_intent = intent_field(j, "pred_intent");
      r.pred_slot = j.at("pred_slot").get<std::vector<std::string>>();
      if (r.golden_slot.size() != r.text.size() || r.pred_slot.size() != r.text.size())
        throw ParseError("slot sequences must match the text length", n);
      out.push_back(std::move(r));
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(e.what(), n);
    }
  }
  return out;
}

std::vector<PredictionRecord> read_predictions(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read predictions file " + path.string());
  return read_predictions(in);
}

void write_predictions(std::ostream& out, const std::vector<PredictionRecord>& records) {
  for (const auto& r : records) out << to_json(r).dump() << '\n';
}

void write_predictions(const std::filesystem::path& path,
                       const std::vector<PredictionRecord>& records) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  write_predictions(out, records);
}

metrics::MetricReport score(const std::vector<PredictionRecord>& records,
                            metrics::SlotMatch match) {
  std::vector<metrics::IntentSet> gi, pi;
  std::vector<metrics::Labels> gs, ps;
  for (const auto& r : records) {
    gi.push_back(r.golden_intent);
    pi.push_back(r.pred_intent);
    gs.push_back(r.golden_slot);
    ps.push_back(r.pred_slot);
  }
  return metrics::compute_report(gi, pi, gs, ps, match);
}

}  // namespace slukit::data
