#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "slukit/data.hpp"

namespace slukit::data {

inline constexpr int kPadId = 0;
inline constexpr int kUnkId = 1;
inline constexpr int kIgnoreIndex = -100;
inline constexpr const char* kPadToken = "<pad>";
inline constexpr const char* kUnkToken = "<unk>";

// Token<->id map. A vocabulary built with reserved entries holds PAD=0 and
// UNK=1 and maps unseen lookups to UNK; a label vocabulary has neither and
// reports unseen labels through `find`.
class Vocabulary {
 public:
  explicit Vocabulary(bool reserved = false);

  // Returns the existing id if `token` is already present.
  int add(const std::string& token);

  std::optional<int> find(std::string_view token) const;
  // UNK for unseen tokens; throws LookupError on a label vocabulary.
  int id(std::string_view token) const;
  // Unseen labels map to kIgnoreIndex.
  int label_id(std::string_view label) const;
  const std::string& token(int id) const;

  std::size_t size() const { return tokens_.size(); }
  bool reserved() const { return reserved_; }
  const std::vector<std::string>& tokens() const { return tokens_; }

  nlohmann::ordered_json to_json() const;
  static Vocabulary from_json(const nlohmann::json& j);

  bool operator==(const Vocabulary& o) const {
    return reserved_ == o.reserved_ && tokens_ == o.tokens_;
  }

 private:
  bool reserved_;
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> index_;
};

struct VocabOptions {
  std::size_t min_freq = 1;
  bool lowercase = true;
  // Multi mode keeps one intent vocabulary entry per atomic intent. Single
  // mode treats the '#'-joined string as one label.
  bool multi_intent = false;
};

struct Vocabularies {
  Vocabulary tokens{true};
  Vocabulary slots;
  Vocabulary intents;
  VocabOptions options;

  std::string normalize(std::string_view token) const;
  int token_id(std::string_view raw) const { return tokens.id(normalize(raw)); }

  nlohmann::ordered_json to_json() const;
  static Vocabularies from_json(const nlohmann::json& j);
};

// ASCII lowercase; other bytes pass through.
std::string to_lower(std::string_view s);

// Throws DegenerateError on an empty corpus.
Vocabularies build_vocab(std::span<const Utterance> utts,
                         const VocabOptions& options = {});

}  // namespace slukit::data
