#include "slukit/data.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "slukit/error.hpp"

namespace slukit::data {

namespace {

std::ifstream open_or_throw(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  return in;
}

std::vector<std::string> string_list(const nlohmann::json& j, const char* key,
                                     std::size_t line) {
  if (!j.contains(key))
    throw ParseError(std::string("missing key \"") + key + "\"", line);
  const auto& v = j.at(key);
  if (!v.is_array())
    throw ParseError(std::string("\"") + key + "\" must be an array", line);
  std::vector<std::string> out;
  out.reserve(v.size());
  for (const auto& e : v) {
    if (!e.is_string())
      throw ParseError(std::string("\"") + key + "\" must hold strings", line);
    out.push_back(e.get<std::string>());
  }
  return out;
}

}  // namespace

CorpusFormat parse_corpus_format(std::string_view name) {
  if (name == "jsonl") return CorpusFormat::kJsonl;
  if (name == "triple-file" || name == "triple_file") return CorpusFormat::kTripleFile;
  throw ContractError("unknown corpus format '" + std::string(name) +
                      "' (expected jsonl or triple-file)");
}

bool is_bio_label(std::string_view label) {
  if (label == "O") return true;
  return label.size() > 2 && (label[0] == 'B' || label[0] == 'I') &&
         label[1] == '-';
}

void validate(const Utterance& u, std::size_t line) {
  if (u.text.empty()) throw DataError("utterance has no tokens", line);
  if (u.slot.size() != u.text.size())
    throw DataError("slot/text length mismatch (" +
                        std::to_string(u.slot.size()) + " labels for " +
                        std::to_string(u.text.size()) + " tokens)",
                    line);
  for (const auto& s : u.slot)
    if (!is_bio_label(s)) throw DataError("malformed slot label '" + s + "'", line);
  if (u.intent.empty()) throw DataError("utterance has no intent", line);
  std::set<std::string> seen;
  for (const auto& i : u.intent) {
    if (i.empty()) throw DataError("empty intent label", line);
    if (!seen.insert(i).second)
      throw DataError("duplicate intent '" + i + "'", line);
  }
}

std::vector<std::string> split_intents(std::string_view joined) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = joined.find(kIntentSeparator, start);
    out.emplace_back(joined.substr(start, pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

std::string join_intents(std::span<const std::string> intents) {
  std::string out;
  for (std::size_t i = 0; i < intents.size(); ++i) {
    if (i) out += kIntentSeparator;
    out += intents[i];
  }
  return out;
}

std::vector<std::string> split_words(std::string_view line) {
  std::vector<std::string> out;
  std::size_t i = 0;
  auto space = [](char c) {
    return c == ' ' || c == '\t' || c == '\r' || c == '\n' || c == '\f' ||
           c == '\v';
  };
  while (i < line.size()) {
    while (i < line.size() && space(line[i])) ++i;
    std::size_t j = i;
    while (j < line.size() && !space(line[j])) ++j;
    if (j > i) out.emplace_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

std::vector<Utterance> read_jsonl(std::istream& in) {
  std::vector<Utterance> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (split_words(line).empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw ParseError(std::string("malformed JSON: ") + e.what(), line_no);
    }
    if (!j.is_object()) throw ParseError("record is not a JSON object", line_no);
    Utterance u;
    u.text = string_list(j, "text", line_no);
    u.slot = string_list(j, "slot", line_no);
    if (!j.contains("intent")) throw ParseError("missing key \"intent\"", line_no);
    const auto& intent = j.at("intent");
    if (intent.is_string())
      u.intent = split_intents(intent.get<std::string>());
    else
      u.intent = string_list(j, "intent", line_no);
    validate(u, line_no);
    out.push_back(std::move(u));
  }
  return out;
}

std::vector<Utterance> read_jsonl(const std::filesystem::path& path) {
  auto in = open_or_throw(path);
  return read_jsonl(in);
}

std::vector<Utterance> read_triple_file(const std::filesystem::path& dir) {
  auto seq_in = open_or_throw(dir / "seq.in");
  auto seq_out = open_or_throw(dir / "seq.out");
  auto label = open_or_throw(dir / "label");
  std::vector<std::string> words, tags, intents;
  for (std::string l; std::getline(seq_in, l);) words.push_back(l);
  for (std::string l; std::getline(seq_out, l);) tags.push_back(l);
  for (std::string l; std::getline(label, l);) intents.push_back(l);
  if (words.size() != tags.size() || words.size() != intents.size())
    throw DataError("seq.in/seq.out/label line counts differ (" +
                    std::to_string(words.size()) + "/" +
                    std::to_string(tags.size()) + "/" +
                    std::to_string(intents.size()) + ")");
  std::vector<Utterance> out;
  out.reserve(words.size());
  for (std::size_t i = 0; i < words.size(); ++i) {
    const std::size_t line_no = i + 1;
    Utterance u;
    u.text = split_words(words[i]);
    u.slot = split_words(tags[i]);
    if (u.text.empty()) throw DataError("empty line in seq.in", line_no);
    if (u.text.size() != u.slot.size())
      throw DataError("seq.in has " + std::to_string(u.text.size()) +
                          " tokens but seq.out has " +
                          std::to_string(u.slot.size()),
                      line_no);
    const auto intent_words = split_words(intents[i]);
    if (intent_words.size() != 1)
      throw DataError("label line must hold exactly one intent spec", line_no);
    u.intent = split_intents(intent_words[0]);
    validate(u, line_no);
    out.push_back(std::move(u));
  }
  return out;
}

std::vector<Utterance> ingest_dataset(const std::filesystem::path& source,
                                      CorpusFormat format) {
  if (!std::filesystem::exists(source))
    throw DataError("dataset source does not exist: " + source.string());
  switch (format) {
    case CorpusFormat::kJsonl: return read_jsonl(source);
    case CorpusFormat::kTripleFile: return read_triple_file(source);
  }
  throw ContractError("unhandled corpus format");
}

std::string to_jsonl(const Utterance& u) {
  nlohmann::ordered_json j;
  j["slot"] = u.slot;
  j["text"] = u.text;
  j["intent"] = join_intents(u.intent);
  return j.dump();
}

void write_jsonl(std::ostream& out, std::span<const Utterance> utts) {
  for (const auto& u : utts) out << to_jsonl(u) << '\n';
}

void write_jsonl(const std::filesystem::path& path,
                 std::span<const Utterance> utts) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  write_jsonl(out, utts);
}

}  // namespace slukit::data
