#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "purouter/parameter.hpp"

namespace purouter::nn {

// Binary layout, all integers uint64 little-endian:
//   "PUROUTER1" | parameter count |
//   per parameter: name length | name bytes | rank | dims... | float64 LE values
inline constexpr char kCheckpointMagic[] = "PUROUTER1";

std::vector<char> serialize_parameters(const ParameterSet& params);
ParameterSet deserialize_parameters(const std::vector<char>& bytes);

void save_checkpoint(const ParameterSet& params, const std::filesystem::path& path);
ParameterSet load_checkpoint(const std::filesystem::path& path);

/// Loads `path` into `params`, requiring identical names and shapes.
void load_checkpoint_into(ParameterSet& params, const std::filesystem::path& path);

}  // namespace purouter::nn
