#pragma once

#include <cstdint>
#include <filesystem>

#include "nstate/models.hpp"

namespace nstate {

inline constexpr char kModelMagic[8] = {'N', 'S', 'T', 'M', 'O', 'D', 'W', '1'};

// Single-file weights: magic "NSTMODW1", u32 LE header length, UTF-8 JSON
// header (spec, seed, per-layer hyperparameters and parameter shapes), then
// float32 LE parameter data in audit row order.
void save_model(const std::filesystem::path& path, Sequential<float>& model,
                const ModelSpec& spec, std::uint64_t seed);

struct LoadedModel {
  ModelSpec spec;
  std::uint64_t seed = 0;
  Sequential<float> model;
};

LoadedModel load_model(const std::filesystem::path& path);

}  // namespace nstate
