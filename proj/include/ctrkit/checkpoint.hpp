#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "ctrkit/graph.hpp"

namespace ctrkit {

// Model checkpoint layout (all integers little-endian):
//   "RSRT" | u16 version | u64 schema hash | u32 config length | config JSON
//   | u32 array count | per array: u32 name length, name, u32 ndims,
//     u32 dims..., float32 payload
// Training math is 64-bit; stored payloads downcast to 32-bit.
struct CheckpointData {
    std::uint64_t schema_hash = 0;
    std::string config_json;
    std::vector<std::pair<std::string, Array>> arrays;
};

void save_checkpoint(const std::string& path, std::uint64_t schema_hash,
                     const std::string& config_json, const ParamStore& params);

CheckpointData load_checkpoint(const std::string& path);

// Copies checkpoint arrays into a ParamStore; names and shapes must match.
void apply_checkpoint(const CheckpointData& data, ParamStore& params);

}  // namespace ctrkit
