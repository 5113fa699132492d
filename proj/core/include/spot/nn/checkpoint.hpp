#pragma once

#include <filesystem>

#include "spot/nn/layers.hpp"

namespace spot::nn {

inline constexpr int kCheckpointVersion = 1;

// Text container, one parameter per record:
//
//   spot-checkpoint 1
//   param <name> <rank> <dim>...
//   <values as C99 hexadecimal floats, space separated>
//   end
//
// Hex floats make the round trip exact and the bytes reproducible.
void save_checkpoint(const ParameterStore& store, const std::filesystem::path& path);

// Loads values into an already-constructed store. Every stored name must
// exist with the same shape and every store parameter must be present;
// otherwise DataError.
void load_checkpoint(ParameterStore& store, const std::filesystem::path& path);

}  // namespace spot::nn
