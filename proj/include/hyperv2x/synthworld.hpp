#pragma once

#include <cstdint>
#include <vector>

#include "hyperv2x/geometry.hpp"
#include "hyperv2x/rng.hpp"
#include "hyperv2x/tensor.hpp"

namespace hyperv2x::world {

struct ScenarioConfig {
  double region_size_m = 32.0;
  double cell_size_m = 0.5;
  std::int64_t num_agents = 3;
  std::int64_t vehicle_count_min = 1;
  std::int64_t vehicle_count_max = 6;
  double agent_fov_deg = 360.0;
  double agent_range_m = 20.0;
  double obs_noise_std = 0.1;
  std::int64_t num_classes_dynamic = 2;
  std::uint64_t seed = 0;

  std::int64_t grid_side() const;  // region/cell, validated to be integral
  void validate() const;           // throws on invariant violations
};

/// One synthetic cooperative-perception scenario. The scene grid doubles as
/// the evaluation (ego) frame; coordinates are centered on the region.
struct BEVScene {
  GridI gt_semantic;               // 0 = background, 1..C_d = dynamic classes
  std::vector<Pose2> agent_poses;  // index 0 is the ego agent
  std::vector<OrientedBox> vehicles;
  double region_size_m = 0.0;
  double cell_size_m = 0.0;

  bool operator==(const BEVScene& o) const;
};

/// Local view of one agent: channel 0 observed occupancy in [0,1], channel 1
/// visibility mask in {0,1}, channel 2 an independently noise-perturbed copy
/// of the occupancy. The local grid has the same side/resolution as the scene
/// grid, is centered on the agent, and is axis-aligned with its heading.
struct AgentObservation {
  Tensor grid;  // [3, H, W]
  std::int64_t agent_index = 0;
};
inline constexpr std::int64_t kObsChannels = 3;

/// Thrown when rejection sampling cannot place all vehicles or agents.
struct PlacementError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

BEVScene generate_scene(const ScenarioConfig& config, std::uint64_t seed);

AgentObservation render_observation(const BEVScene& scene, std::int64_t agent_index,
                                    const ScenarioConfig& config, std::uint64_t seed);

/// Class-id raster of the scene's vehicles: a cell is foreground iff its
/// center lies inside a vehicle rectangle (boundary inclusive).
GridI rasterize_gt(const BEVScene& scene);

/// Raster of `boxes` into an arbitrary H×W grid whose frame is given as a
/// local->world pose. Used for the scene grid (identity-centered pose) and
/// for agent-local grids alike.
GridI rasterize_boxes(const std::vector<OrientedBox>& boxes, const Pose2& frame_pose,
                      std::int64_t h, std::int64_t w, double cell);

/// Visibility of every cell of a local grid for a sensor at the grid center
/// heading +x. A cell is visible iff its center is within range and field of
/// view and no occupied cell's center lies strictly within half a cell of the
/// open sight segment. The same rule is re-derived exhaustively by the test
/// oracle; the two must agree exactly.
GridI compute_visibility(const GridI& occupied, double cell, double range_m, double fov_deg);

}  // namespace hyperv2x::world
