#include "slukit/word_vectors.hpp"

#include <charconv>
#include <fstream>
#include <random>
#include <unordered_set>

#include "slukit/error.hpp"

namespace slukit::data {

EmbeddingMatrix random_embeddings(std::size_t rows, std::size_t dim,
                                  std::uint64_t seed, bool zero_pad) {
  if (dim == 0) throw ContractError("embedding dim must be positive");
  EmbeddingMatrix m;
  m.rows = rows;
  m.dim = dim;
  m.values.resize(rows * dim);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-0.1, 0.1);
  for (double& v : m.values) v = u(rng);
  if (zero_pad && rows > 0)
    std::fill(m.values.begin(), m.values.begin() + static_cast<std::ptrdiff_t>(dim), 0.0);
  return m;
}

EmbeddingMatrix load_word_vectors(std::istream& in, const Vocabulary& vocab,
                                  std::size_t dim, std::uint64_t seed) {
  auto m = random_embeddings(vocab.size(), dim, seed, vocab.reserved());
  std::unordered_set<int> filled;
  std::string line;
  std::size_t line_no = 0;
  std::vector<double> row(dim);
  while (std::getline(in, line)) {
    ++line_no;
    const auto fields = split_words(line);
    if (fields.empty()) continue;
    if (fields.size() != dim + 1)
      throw ParseError("expected " + std::to_string(dim) + " values, found " +
                           std::to_string(fields.size() - 1),
                       line_no);
    for (std::size_t d = 0; d < dim; ++d) {
      const auto& f = fields[d + 1];
      const auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), row[d]);
      if (ec != std::errc() || ptr != f.data() + f.size())
        throw ParseError("bad number '" + f + "'", line_no);
    }
    const auto id = vocab.find(fields[0]);
    if (!id || (vocab.reserved() && *id == kPadId)) continue;
    if (!filled.insert(*id).second) continue;
    std::copy(row.begin(), row.end(),
              m.values.begin() + static_cast<std::ptrdiff_t>(*id * dim));
  }
  m.covered = filled.size();
  return m;
}

EmbeddingMatrix load_word_vectors(const std::filesystem::path& path,
                                  const Vocabulary& vocab, std::size_t dim,
                                  std::uint64_t seed) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open word vectors " + path.string());
  return load_word_vectors(in, vocab, dim, seed);
}

}  // namespace slukit::data
