#pragma once

// Corpus records and ingestion.
//
// The on-disk unified format is JSON Lines, one utterance per line:
//   {"slot": ["O", "B-x", ...], "text": ["w1", "w2", ...], "intent": "a#b"}
// Intents are held as a list in memory. They are written as one '#'-joined
// string, so a single-intent record carries a bare scalar. On input both a
// string (split on '#') and a JSON array are accepted.

#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace slukit::data {

inline constexpr char kIntentSeparator = '#';

struct Utterance {
  std::vector<std::string> text;
  std::vector<std::string> slot;
  std::vector<std::string> intent;

  bool operator==(const Utterance&) const = default;
};

enum class CorpusFormat { kJsonl, kTripleFile };
CorpusFormat parse_corpus_format(std::string_view name);

// Throws DataError (with `line` if non-zero) when `u` breaks the record
// invariants: non-empty, equal text/slot lengths, BIO-shaped labels, and a
// non-empty duplicate-free intent list.
void validate(const Utterance& u, std::size_t line = 0);

bool is_bio_label(std::string_view label);

std::vector<std::string> split_intents(std::string_view joined);
std::string join_intents(std::span<const std::string> intents);

// `source` is a .jsonl file for kJsonl, or a directory holding seq.in,
// seq.out and label for kTripleFile.
std::vector<Utterance> ingest_dataset(const std::filesystem::path& source,
                                      CorpusFormat format);

std::vector<Utterance> read_jsonl(std::istream& in);
std::vector<Utterance> read_jsonl(const std::filesystem::path& path);
std::vector<Utterance> read_triple_file(const std::filesystem::path& dir);

// One record, keys in the order slot, text, intent; no trailing newline.
std::string to_jsonl(const Utterance& u);
void write_jsonl(std::ostream& out, std::span<const Utterance> utts);
void write_jsonl(const std::filesystem::path& path,
                 std::span<const Utterance> utts);

// Splits on ASCII whitespace.
std::vector<std::string> split_words(std::string_view line);

}  // namespace slukit::data
