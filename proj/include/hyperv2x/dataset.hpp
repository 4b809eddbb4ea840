#pragma once

#include <filesystem>
#include <vector>

#include "hyperv2x/synthworld.hpp"

namespace hyperv2x::world {

/// One scene together with every agent's rendered observation.
struct SceneRecord {
  BEVScene scene;
  std::vector<AgentObservation> observations;
  std::uint64_t scene_seed = 0;
};

struct Dataset {
  ScenarioConfig config;
  std::uint64_t base_seed = 0;
  std::vector<SceneRecord> scenes;
};

/// Generates `count` scenes with per-scene seeds base_seed, base_seed+1, ...
/// Scenes are pure functions of (config, seed), so the optional worker pool
/// changes wall time only, never content.
Dataset build_dataset(const ScenarioConfig& config, std::uint64_t base_seed, std::int64_t count,
                      int workers = 1);

/// One directory per split: scene_NNNNN.tns files plus manifest.json holding
/// the config, seeds and per-scene checksums. Loading verifies checksums and
/// fails loudly on any mismatch.
void save_dataset(const Dataset& ds, const std::filesystem::path& dir);
Dataset load_dataset(const std::filesystem::path& dir);

}  // namespace hyperv2x::world
