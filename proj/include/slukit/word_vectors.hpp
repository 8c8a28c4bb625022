#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <vector>

#include "slukit/vocab.hpp"

namespace slukit::data {

// Row-major [rows×dim].
struct EmbeddingMatrix {
  std::size_t rows = 0;
  std::size_t dim = 0;
  std::vector<double> values;
  std::size_t covered = 0;  // vocabulary rows filled from the file
};

// Every row starts uniform in [-0.1, 0.1] drawn from `seed`, PAD is zeroed,
// then rows whose token appears in the file are overwritten with the file
// values. The first occurrence of a token wins. Lines are "token v1 ... vdim".
EmbeddingMatrix load_word_vectors(std::istream& in, const Vocabulary& vocab,
                                  std::size_t dim, std::uint64_t seed);
EmbeddingMatrix load_word_vectors(const std::filesystem::path& path,
                                  const Vocabulary& vocab, std::size_t dim,
                                  std::uint64_t seed);

// The random part alone: uniform rows with a zero PAD row.
EmbeddingMatrix random_embeddings(std::size_t rows, std::size_t dim,
                                  std::uint64_t seed, bool zero_pad = true);

}  // namespace slukit::data
