// slukit-prepare: builds the JSONL corpora under data/.
//
//   slukit-prepare atis --source DIR --out data/atis
//     DIR holds train_dev and test in "word:LABEL ... <=> intent" form, with
//     multiple intents joined by ';'. train_dev splits into 4478 train and
//     500 dev lines.
//   slukit-prepare mixatis --atis data/atis --out data/mixatis --seed 13
//     Joins 1, 2 or 3 ATIS utterances with distinct intents (ratio
//     0.3/0.5/0.2) using "and" tagged O.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <set>

#include "slukit/data.hpp"
#include "slukit/error.hpp"

namespace fs = std::filesystem;
using slukit::data::Utterance;

namespace {

constexpr std::size_t kAtisTrain = 4478;

Utterance parse_zc_line(const std::string& line, std::size_t line_no) {
  const auto sep = line.find("<=>");
  if (sep == std::string::npos) throw slukit::DataError("missing '<=>'", line_no);
  Utterance u;
  for (const auto& pair : slukit::data::split_words(line.substr(0, sep))) {
    const auto colon = pair.rfind(':');
    if (colon == std::string::npos || colon == 0)
      throw slukit::DataError("token without label: " + pair, line_no);
    u.text.push_back(pair.substr(0, colon));
    u.slot.push_back(pair.substr(colon + 1));
  }
  const auto intent = slukit::data::split_words(line.substr(sep + 3));
  if (intent.size() != 1) throw slukit::DataError("expected one intent field", line_no);
  std::string joined = intent[0];
  std::replace(joined.begin(), joined.end(), ';', slukit::data::kIntentSeparator);
  u.intent = slukit::data::split_intents(joined);
  slukit::data::validate(u, line_no);
  return u;
}

std::vector<Utterance> read_zc(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw slukit::DataError("cannot open " + path.string());
  std::vector<Utterance> out;
  std::size_t n = 0;
  for (std::string line; std::getline(in, line);) {
    ++n;
    if (slukit::data::split_words(line).empty()) continue;
    out.push_back(parse_zc_line(line, n));
  }
  return out;
}

void prepare_atis(const fs::path& source, const fs::path& out) {
  auto train_dev = read_zc(source / "train_dev");
  auto test = read_zc(source / "test");
  if (train_dev.size() <= kAtisTrain)
    throw slukit::DataError("train_dev has only " + std::to_string(train_dev.size()) + " lines");
  std::vector<Utterance> train(train_dev.begin(), train_dev.begin() + kAtisTrain);
  std::vector<Utterance> dev(train_dev.begin() + kAtisTrain, train_dev.end());
  fs::create_directories(out);
  slukit::data::write_jsonl(out / "train.jsonl", train);
  slukit::data::write_jsonl(out / "dev.jsonl", dev);
  slukit::data::write_jsonl(out / "test.jsonl", test);
  std::cout << "atis: " << train.size() << " train, " << dev.size() << " dev, "
            << test.size() << " test\n";
}

std::vector<Utterance> mix(const std::vector<Utterance>& pool, std::size_t count,
                           std::mt19937_64& rng) {
  std::discrete_distribution<int> parts({0.3, 0.5, 0.2});
  std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
  std::vector<Utterance> out;
  out.reserve(count);
  while (out.size() < count) {
    const int k = parts(rng) + 1;
    Utterance u;
    std::set<std::string> used;
    int joined = 0;
    for (int attempt = 0; joined < k && attempt < 100; ++attempt) {
      const auto& src = pool[pick(rng)];
      if (std::any_of(src.intent.begin(), src.intent.end(),
                      [&](const std::string& i) { return used.count(i) > 0; }))
        continue;
      if (joined > 0) {
        u.text.push_back("and");
        u.slot.push_back("O");
      }
      u.text.insert(u.text.end(), src.text.begin(), src.text.end());
      u.slot.insert(u.slot.end(), src.slot.begin(), src.slot.end());
      for (const auto& i : src.intent) {
        used.insert(i);
        u.intent.push_back(i);
      }
      ++joined;
    }
    if (joined == k) out.push_back(std::move(u));
  }
  return out;
}

void prepare_mixatis(const fs::path& atis, const fs::path& out, std::uint64_t seed,
                     std::size_t n_train, std::size_t n_dev, std::size_t n_test) {
  std::mt19937_64 rng(seed);
  const auto train = mix(slukit::data::read_jsonl(atis / "train.jsonl"), n_train, rng);
  const auto dev = mix(slukit::data::read_jsonl(atis / "dev.jsonl"), n_dev, rng);
  const auto test = mix(slukit::data::read_jsonl(atis / "test.jsonl"), n_test, rng);
  fs::create_directories(out);
  slukit::data::write_jsonl(out / "train.jsonl", train);
  slukit::data::write_jsonl(out / "dev.jsonl", dev);
  slukit::data::write_jsonl(out / "test.jsonl", test);
  std::cout << "mixatis: " << train.size() << " train, " << dev.size() << " dev, "
            << test.size() << " test\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Build the JSONL corpora"};
  app.require_subcommand(1);

  std::string source, atis_out = "data/atis";
  auto* atis = app.add_subcommand("atis", "Convert the ATIS train_dev/test files");
  atis->add_option("--source", source, "Directory with train_dev and test")->required();
  atis->add_option("--out", atis_out, "Output directory");

  std::string atis_dir = "data/atis", mix_out = "data/mixatis";
  std::uint64_t seed = 13;
  std::size_t n_train = 13162, n_dev = 756, n_test = 828;
  auto* mixatis = app.add_subcommand("mixatis", "Generate the multi-intent corpus");
  mixatis->add_option("--atis", atis_dir, "Converted ATIS directory");
  mixatis->add_option("--out", mix_out, "Output directory");
  mixatis->add_option("--seed", seed, "Sampling seed");
  mixatis->add_option("--train", n_train, "Train size");
  mixatis->add_option("--dev", n_dev, "Dev size");
  mixatis->add_option("--test", n_test, "Test size");

  CLI11_PARSE(app, argc, argv);
  try {
    if (*atis) prepare_atis(source, atis_out);
    if (*mixatis) prepare_mixatis(atis_dir, mix_out, seed, n_train, n_dev, n_test);
  } catch (const slukit::Error& e) {
    std::cerr << e.kind() << ": " << e.what() << "\n";
    return 3;
  }
  return 0;
}
