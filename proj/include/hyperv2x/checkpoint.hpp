#pragma once

#include <filesystem>
#include <string>

#include "hyperv2x/model.hpp"

namespace hyperv2x::ckpt {

/// Self-describing binary checkpoint: a JSON header (variant, specs, manifest
/// hash, tensor directory, config echo, RNG state) followed by the raw f64
/// payload. Loading re-derives the weight manifest from the stored decoder
/// spec and refuses files whose manifest or payload hash does not match.
void save(const std::filesystem::path& path, const Model& m, const std::string& config_echo,
          const std::string& rng_state);

struct Loaded {
  Model model;
  std::string config_echo;
  std::string rng_state;
};

Loaded load(const std::filesystem::path& path);

}  // namespace hyperv2x::ckpt
