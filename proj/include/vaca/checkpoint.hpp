#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "vaca/autodiff.hpp"

namespace vaca::ad {

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using NamedParameters = std::vector<std::pair<std::string, Parameter*>>;

/// Binary container: 8-byte magic, u32 version, u64 index length, a JSON index
/// of {name, shape, offset}, then all values as little-endian doubles.
void save_parameters(const std::filesystem::path& file, const NamedParameters& params);

/// Restores every listed parameter by name. Missing names, extra names and
/// shape mismatches are errors; values are copied bit for bit.
void load_parameters(const std::filesystem::path& file, const NamedParameters& params);

}  // namespace vaca::ad
