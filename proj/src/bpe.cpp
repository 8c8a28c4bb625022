#include "slukit/bpe.hpp"

#include <fstream>
#include <limits>

#include "slukit/error.hpp"

namespace slukit::data {

std::vector<std::string> utf8_chars(std::string_view s) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < s.size()) {
    const auto lead = static_cast<unsigned char>(s[i]);
    std::size_t len = 1;
    if (lead >= 0xF0) len = 4;
    else if (lead >= 0xE0) len = 3;
    else if (lead >= 0xC0) len = 2;
    len = std::min(len, s.size() - i);
    out.emplace_back(s.substr(i, len));
    i += len;
  }
  return out;
}

BpeTokenizer::BpeTokenizer(std::vector<std::pair<std::string, std::string>> merges,
                           std::vector<std::string> vocab) {
  for (std::size_t r = 0; r < merges.size(); ++r)
    ranks_.try_emplace(std::move(merges[r]), r);
  for (auto& t : vocab) vocab_.add(t);
}

BpeTokenizer BpeTokenizer::load(const std::filesystem::path& merges_path,
                                const std::filesystem::path& vocab_path) {
  std::ifstream mf(merges_path);
  if (!mf) throw DataError("cannot open merges file " + merges_path.string());
  std::ifstream vf(vocab_path);
  if (!vf) throw DataError("cannot open subword vocab " + vocab_path.string());
  std::vector<std::pair<std::string, std::string>> merges;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(mf, line)) {
    ++line_no;
    if (!line.empty() && line[0] == '#') continue;
    const auto f = split_words(line);
    if (f.empty()) continue;
    if (f.size() != 2) throw ParseError("merge line must hold two symbols", line_no);
    merges.emplace_back(f[0], f[1]);
  }
  std::vector<std::string> vocab;
  line_no = 0;
  while (std::getline(vf, line)) {
    ++line_no;
    const auto f = split_words(line);
    if (f.empty()) continue;
    vocab.push_back(f[0]);
  }
  return BpeTokenizer(std::move(merges), std::move(vocab));
}

std::vector<std::string> BpeTokenizer::tokenize_word(std::string_view word) const {
  auto parts = utf8_chars(word);
  while (parts.size() > 1) {
    std::size_t best = std::numeric_limits<std::size_t>::max();
    std::pair<std::string, std::string> best_pair;
    for (std::size_t i = 0; i + 1 < parts.size(); ++i) {
      auto it = ranks_.find({parts[i], parts[i + 1]});
      if (it != ranks_.end() && it->second < best) {
        best = it->second;
        best_pair = it->first;
      }
    }
    if (best == std::numeric_limits<std::size_t>::max()) break;
    std::vector<std::string> next;
    next.reserve(parts.size());
    for (std::size_t i = 0; i < parts.size(); ++i) {
      if (i + 1 < parts.size() && parts[i] == best_pair.first &&
          parts[i + 1] == best_pair.second) {
        next.push_back(parts[i] + parts[i + 1]);
        ++i;
      } else {
        next.push_back(parts[i]);
      }
    }
    parts = std::move(next);
  }
  return parts;
}

int BpeTokenizer::id(std::string_view subtoken) const {
  return vocab_.find(subtoken).value_or(-1);
}

AlignedUtterance subword_align(const Utterance& utt, const BpeTokenizer& tok,
                               const Vocabulary& slots,
                               ContinuationLabel continuation) {
  AlignedUtterance out;
  for (std::size_t w = 0; w < utt.text.size(); ++w) {
    const auto pieces = tok.tokenize_word(utt.text[w]);
    const std::string& label = utt.slot[w];
    int rest = kIgnoreIndex;
    if (continuation == ContinuationLabel::kInside)
      rest = label == "O" ? slots.label_id("O") : slots.label_id("I-" + label.substr(2));
    for (std::size_t p = 0; p < pieces.size(); ++p) {
      out.subtokens.push_back(pieces[p]);
      out.slot_ids.push_back(p == 0 ? slots.label_id(label) : rest);
      out.word_index.push_back(w);
    }
  }
  return out;
}

}  // namespace slukit::data
