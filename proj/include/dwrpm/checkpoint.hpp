#pragma once

#include <cstdint>
#include <filesystem>

#include "dwrpm/data.hpp"
#include "dwrpm/model.hpp"

namespace dwrpm {

struct Checkpoint {
  ModelGraph model;
  Normalizer normalizer;
  std::uint64_t seed = 0;
};

/// Versioned binary container: architecture, seq_len, layer options, the
/// normalization constants, the seed, then every parameter as
/// (name, shape, little-endian float64 values).
void save_checkpoint(const std::filesystem::path& path, const ModelGraph& model,
                     const Normalizer& normalizer, std::uint64_t seed);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace dwrpm
