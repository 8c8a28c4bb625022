#include "slukit/checkpoint.hpp"

#include <algorithm>
#include <bit>
#include <fstream>
#include <iterator>
#include <sstream>
#include <unordered_map>

#include "slukit/error.hpp"

namespace slukit::ad {

namespace {

template <typename U>
void put_le(std::string& out, U value) {
  for (std::size_t i = 0; i < sizeof(U); ++i)
    out.push_back(static_cast<char>((value >> (8 * i)) & 0xFF));
}

class Reader {
 public:
  explicit Reader(const std::string& bytes) : bytes_(bytes) {}

  bool done() const { return pos_ == bytes_.size(); }

  template <typename U>
  U get_le(const char* what) {
    need(sizeof(U), what);
    U value = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i)
      value |= static_cast<U>(static_cast<unsigned char>(bytes_[pos_ + i]))
               << (8 * i);
    pos_ += sizeof(U);
    return value;
  }

  std::string get_bytes(std::size_t n, const char* what) {
    need(n, what);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

 private:
  void need(std::size_t n, const char* what) {
    if (bytes_.size() - pos_ < n)
      throw ParseError(std::string("checkpoint truncated while reading ") +
                           what,
                       0);
  }

  const std::string& bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<ParameterRecord> snapshot(const NamedParams& params) {
  std::vector<ParameterRecord> out;
  out.reserve(params.size());
  for (const auto& [name, t] : params)
    out.push_back({name, t.shape(), {t.values().begin(), t.values().end()}});
  return out;
}

std::string encode_checkpoint(const std::vector<ParameterRecord>& records) {
  std::string out(kCheckpointMagic, 4);
  put_le<std::uint32_t>(out, kCheckpointVersion);
  for (const auto& r : records) {
    if (numel(r.shape) != r.values.size())
      throw ShapeError("checkpoint record '" + r.name + "' has shape " +
                       to_string(r.shape) + " but " +
                       std::to_string(r.values.size()) + " values");
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(r.name.size()));
    out += r.name;
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(r.shape.size()));
    for (std::size_t e : r.shape) put_le<std::uint64_t>(out, e);
    for (double v : r.values) put_le<std::uint64_t>(out, std::bit_cast<std::uint64_t>(v));
  }
  return out;
}

std::vector<ParameterRecord> decode_checkpoint(const std::string& bytes) {
  Reader in(bytes);
  if (in.get_bytes(4, "magic") != std::string(kCheckpointMagic, 4))
    throw ParseError("not a checkpoint file (bad magic)", 0);
  const auto version = in.get_le<std::uint32_t>("version");
  if (version != kCheckpointVersion)
    throw ParseError("unsupported checkpoint version " + std::to_string(version),
                     0);
  std::vector<ParameterRecord> out;
  while (!in.done()) {
    ParameterRecord r;
    const auto name_len = in.get_le<std::uint32_t>("name length");
    r.name = in.get_bytes(name_len, "name");
    const auto rank = in.get_le<std::uint32_t>("rank");
    for (std::uint32_t i = 0; i < rank; ++i)
      r.shape.push_back(static_cast<std::size_t>(in.get_le<std::uint64_t>("extent")));
    const std::size_t n = numel(r.shape);
    r.values.reserve(n);
    for (std::size_t i = 0; i < n; ++i)
      r.values.push_back(std::bit_cast<double>(in.get_le<std::uint64_t>("values")));
    out.push_back(std::move(r));
  }
  return out;
}

void save_checkpoint(const std::filesystem::path& path,
                     const std::vector<ParameterRecord>& records) {
  const std::string bytes = encode_checkpoint(records);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write checkpoint " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

std::vector<ParameterRecord> load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint " + path.string());
  std::string bytes((std::istreambuf_iterator<char>(in)),
                    std::istreambuf_iterator<char>());
  return decode_checkpoint(bytes);
}

void restore(const NamedParams& params,
             const std::vector<ParameterRecord>& records) {
  if (params.size() != records.size())
    throw ContractError("checkpoint holds " + std::to_string(records.size()) +
                        " parameters, model has " +
                        std::to_string(params.size()));
  std::unordered_map<std::string, const ParameterRecord*> by_name;
  for (const auto& r : records) by_name[r.name] = &r;
  for (const auto& [name, t] : params) {
    auto it = by_name.find(name);
    if (it == by_name.end())
      throw ContractError("checkpoint lacks parameter '" + name + "'");
    if (it->second->shape != t.shape())
      throw ContractError("parameter '" + name + "' has shape " +
                          to_string(t.shape()) + " but checkpoint stores " +
                          to_string(it->second->shape));
  }
  for (const auto& [name, t] : params) {
    Tensor target = t;
    const auto& src = by_name.at(name)->values;
    std::copy(src.begin(), src.end(), target.mutable_values().begin());
  }
}

}  // namespace slukit::ad
