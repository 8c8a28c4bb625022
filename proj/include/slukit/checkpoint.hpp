#pragma once

// Binary parameter checkpoints.
//
// Layout (all integers and floats little-endian):
//   "SLUF"                      4 bytes magic
//   u32 version                 currently 1
//   repeated until EOF:
//     u32 name_length, name bytes (UTF-8)
//     u32 rank, rank × u64 extents
//     product(extents) × f64 values

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "slukit/tensor.hpp"

namespace slukit::ad {

inline constexpr char kCheckpointMagic[4] = {'S', 'L', 'U', 'F'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct ParameterRecord {
  std::string name;
  Shape shape;
  std::vector<double> values;
  bool operator==(const ParameterRecord&) const = default;
};

std::vector<ParameterRecord> snapshot(const NamedParams& params);

std::string encode_checkpoint(const std::vector<ParameterRecord>& records);
std::vector<ParameterRecord> decode_checkpoint(const std::string& bytes);

void save_checkpoint(const std::filesystem::path& path,
                     const std::vector<ParameterRecord>& records);
std::vector<ParameterRecord> load_checkpoint(const std::filesystem::path& path);

// Copies records into live parameters. Names and shapes must match one to
// one, otherwise ContractError.
void restore(const NamedParams& params,
             const std::vector<ParameterRecord>& records);

}  // namespace slukit::ad
