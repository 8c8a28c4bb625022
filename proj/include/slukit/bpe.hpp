#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "slukit/vocab.hpp"

namespace slukit::data {

// Byte-pair tokenizer. Rank is the merge's line position in the merges file.
class BpeTokenizer {
 public:
  BpeTokenizer(std::vector<std::pair<std::string, std::string>> merges,
               std::vector<std::string> vocab);

  // merges: one "a b" pair per line ('#' lines skipped); vocab: one
  // subtoken per line.
  static BpeTokenizer load(const std::filesystem::path& merges,
                           const std::filesystem::path& vocab);

  // Starts from UTF-8 characters and repeatedly merges the lowest-ranked
  // adjacent pair. Characters no merge touches stay single tokens.
  std::vector<std::string> tokenize_word(std::string_view word) const;

  // -1 for subtokens outside the subword vocabulary.
  int id(std::string_view subtoken) const;
  std::size_t merge_count() const { return ranks_.size(); }

 private:
  std::map<std::pair<std::string, std::string>, std::size_t> ranks_;
  Vocabulary vocab_;
};

// How subtokens after the first in a word are labelled.
enum class ContinuationLabel { kIgnore, kInside };

struct AlignedUtterance {
  std::vector<std::string> subtokens;
  std::vector<int> slot_ids;
  std::vector<std::size_t> word_index;  // source word of each subtoken
};

// The first subtoken of each word carries the word's slot id. Later ones
// carry kIgnoreIndex, or with kInside the I- form of the word's label.
AlignedUtterance subword_align(const Utterance& utt, const BpeTokenizer& tok,
                               const Vocabulary& slots,
                               ContinuationLabel continuation = ContinuationLabel::kIgnore);

std::vector<std::string> utf8_chars(std::string_view s);

}  // namespace slukit::data
