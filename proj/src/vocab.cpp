#include "slukit/vocab.hpp"

#include <algorithm>

#include "slukit/error.hpp"

namespace slukit::data {

Vocabulary::Vocabulary(bool reserved) : reserved_(reserved) {
  if (reserved_) {
    add(kPadToken);
    add(kUnkToken);
  }
}

int Vocabulary::add(const std::string& token) {
  if (auto it = index_.find(token); it != index_.end()) return it->second;
  const int id = static_cast<int>(tokens_.size());
  tokens_.push_back(token);
  index_.emplace(token, id);
  return id;
}

std::optional<int> Vocabulary::find(std::string_view token) const {
  if (auto it = index_.find(std::string(token)); it != index_.end())
    return it->second;
  return std::nullopt;
}

int Vocabulary::id(std::string_view token) const {
  if (auto f = find(token)) return *f;
  if (!reserved_)
    throw LookupError("label '" + std::string(token) + "' not in vocabulary");
  return kUnkId;
}

int Vocabulary::label_id(std::string_view label) const {
  return find(label).value_or(kIgnoreIndex);
}

const std::string& Vocabulary::token(int id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size())
    throw LookupError("id " + std::to_string(id) + " outside vocabulary of size " +
                      std::to_string(tokens_.size()));
  return tokens_[static_cast<std::size_t>(id)];
}

nlohmann::ordered_json Vocabulary::to_json() const {
  nlohmann::ordered_json j;
  j["reserved"] = reserved_;
  j["tokens"] = tokens_;
  return j;
}

Vocabulary Vocabulary::from_json(const nlohmann::json& j) {
  const bool reserved = j.at("reserved").get<bool>();
  const auto tokens = j.at("tokens").get<std::vector<std::string>>();
  Vocabulary v(reserved);
  const std::size_t skip = reserved ? 2 : 0;
  if (tokens.size() < skip) throw ParseError("vocabulary is missing reserved entries", 0);
  for (std::size_t i = skip; i < tokens.size(); ++i) {
    if (v.add(tokens[i]) != static_cast<int>(i))
      throw ParseError("duplicate vocabulary entry '" + tokens[i] + "'", 0);
  }
  return v;
}

std::string to_lower(std::string_view s) {
  std::string out(s);
  for (char& c : out)
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  return out;
}

std::string Vocabularies::normalize(std::string_view token) const {
  return options.lowercase ? to_lower(token) : std::string(token);
}

nlohmann::ordered_json Vocabularies::to_json() const {
  nlohmann::ordered_json j;
  j["min_freq"] = options.min_freq;
  j["lowercase"] = options.lowercase;
  j["multi_intent"] = options.multi_intent;
  j["tokens"] = tokens.to_json();
  j["slots"] = slots.to_json();
  j["intents"] = intents.to_json();
  return j;
}

Vocabularies Vocabularies::from_json(const nlohmann::json& j) {
  Vocabularies v;
  v.options.min_freq = j.at("min_freq").get<std::size_t>();
  v.options.lowercase = j.at("lowercase").get<bool>();
  v.options.multi_intent = j.at("multi_intent").get<bool>();
  v.tokens = Vocabulary::from_json(j.at("tokens"));
  v.slots = Vocabulary::from_json(j.at("slots"));
  v.intents = Vocabulary::from_json(j.at("intents"));
  return v;
}

Vocabularies build_vocab(std::span<const Utterance> utts,
                         const VocabOptions& options) {
  if (utts.empty()) throw DegenerateError("cannot build a vocabulary from no utterances");
  Vocabularies v;
  v.options = options;

  struct Count {
    std::size_t freq = 0;
    std::size_t first = 0;
  };
  std::unordered_map<std::string, Count> counts;
  std::vector<std::string> order;
  for (const auto& u : utts) {
    for (const auto& w : u.text) {
      auto key = v.normalize(w);
      auto [it, fresh] = counts.try_emplace(key);
      if (fresh) {
        it->second.first = order.size();
        order.push_back(key);
      }
      ++it->second.freq;
    }
    for (const auto& s : u.slot) v.slots.add(s);
    if (options.multi_intent) {
      for (const auto& i : u.intent) v.intents.add(i);
    } else {
      v.intents.add(join_intents(u.intent));
    }
  }
  std::stable_sort(order.begin(), order.end(),
                   [&](const std::string& a, const std::string& b) {
                     return counts[a].freq > counts[b].freq;
                   });
  for (const auto& t : order)
    if (counts[t].freq >= options.min_freq && t != kPadToken && t != kUnkToken)
      v.tokens.add(t);
  return v;
}

}  // namespace slukit::data
