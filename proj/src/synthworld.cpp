#include "hyperv2x/synthworld.hpp"

#include <algorithm>
#include <cmath>

namespace hyperv2x {

namespace {

void box_corners(const OrientedBox& b, double margin, double out[4][2]) {
  const double c = std::cos(b.yaw), s = std::sin(b.yaw);
  const double hl = 0.5 * b.length + 0.5 * margin, hw = 0.5 * b.width + 0.5 * margin;
  const double ex[4] = {hl, hl, -hl, -hl};
  const double ey[4] = {hw, -hw, -hw, hw};
  for (int i = 0; i < 4; ++i) {
    out[i][0] = b.cx + c * ex[i] - s * ey[i];
    out[i][1] = b.cy + s * ex[i] + c * ey[i];
  }
}

bool separated_on_axis(const double pa[4][2], const double pb[4][2], double ax, double ay) {
  double amin = 1e300, amax = -1e300, bmin = 1e300, bmax = -1e300;
  for (int i = 0; i < 4; ++i) {
    const double da = pa[i][0] * ax + pa[i][1] * ay;
    const double db = pb[i][0] * ax + pb[i][1] * ay;
    amin = std::min(amin, da), amax = std::max(amax, da);
    bmin = std::min(bmin, db), bmax = std::max(bmax, db);
  }
  return amax < bmin || bmax < amin;
}

}  // namespace

bool boxes_overlap(const OrientedBox& a, const OrientedBox& b, double margin) {
  double pa[4][2], pb[4][2];
  box_corners(a, margin, pa);
  box_corners(b, margin, pb);
  const double axes[4][2] = {{std::cos(a.yaw), std::sin(a.yaw)},
                             {-std::sin(a.yaw), std::cos(a.yaw)},
                             {std::cos(b.yaw), std::sin(b.yaw)},
                             {-std::sin(b.yaw), std::cos(b.yaw)}};
  for (const auto& ax : axes)
    if (separated_on_axis(pa, pb, ax[0], ax[1])) return false;
  return true;
}

namespace world {

std::int64_t ScenarioConfig::grid_side() const {
  const double side = region_size_m / cell_size_m;
  const auto n = static_cast<std::int64_t>(std::llround(side));
  if (n <= 0 || std::fabs(side - static_cast<double>(n)) > 1e-9)
    throw std::invalid_argument("ScenarioConfig: region_size_m / cell_size_m must be a positive integer");
  return n;
}

void ScenarioConfig::validate() const {
  if (cell_size_m <= 0) throw std::invalid_argument("ScenarioConfig: cell_size_m must be > 0");
  grid_side();
  if (num_agents < 1) throw std::invalid_argument("ScenarioConfig: num_agents must be >= 1");
  if (vehicle_count_min < 0 || vehicle_count_max < vehicle_count_min)
    throw std::invalid_argument("ScenarioConfig: bad vehicle_count range");
  if (agent_fov_deg <= 0 || agent_fov_deg > 360.0)
    throw std::invalid_argument("ScenarioConfig: agent_fov_deg must be in (0, 360]");
  if (agent_range_m < 0) throw std::invalid_argument("ScenarioConfig: agent_range_m must be >= 0");
  if (obs_noise_std < 0) throw std::invalid_argument("ScenarioConfig: obs_noise_std must be >= 0");
  if (num_classes_dynamic < 1)
    throw std::invalid_argument("ScenarioConfig: num_classes_dynamic must be >= 1");
}

bool BEVScene::operator==(const BEVScene& o) const {
  if (!(gt_semantic == o.gt_semantic) || agent_poses.size() != o.agent_poses.size() ||
      vehicles.size() != o.vehicles.size() || region_size_m != o.region_size_m ||
      cell_size_m != o.cell_size_m)
    return false;
  for (std::size_t i = 0; i < agent_poses.size(); ++i) {
    const auto &a = agent_poses[i], &b = o.agent_poses[i];
    if (a.x != b.x || a.y != b.y || a.yaw != b.yaw) return false;
  }
  for (std::size_t i = 0; i < vehicles.size(); ++i) {
    const auto &a = vehicles[i], &b = o.vehicles[i];
    if (a.cx != b.cx || a.cy != b.cy || a.length != b.length || a.width != b.width ||
        a.yaw != b.yaw || a.class_id != b.class_id)
      return false;
  }
  return true;
}

GridI rasterize_boxes(const std::vector<OrientedBox>& boxes, const Pose2& frame_pose,
                      std::int64_t h, std::int64_t w, double cell) {
  GridI grid(h, w);
  const Se2 to_world = Se2::from_pose(frame_pose);
  for (std::int64_t r = 0; r < h; ++r) {
    for (std::int64_t c = 0; c < w; ++c) {
      double lx, ly;
      cell_center(r, c, h, w, cell, lx, ly);
      double wx, wy;
      to_world.apply(lx, ly, wx, wy);
      for (const auto& b : boxes) {
        if (b.contains(wx, wy)) {
          grid.at(r, c) = static_cast<std::int32_t>(b.class_id);
          break;
        }
      }
    }
  }
  return grid;
}

GridI rasterize_gt(const BEVScene& scene) {
  const auto n = static_cast<std::int64_t>(std::llround(scene.region_size_m / scene.cell_size_m));
  return rasterize_boxes(scene.vehicles, Pose2{}, n, n, scene.cell_size_m);
}

namespace {

// Vehicle footprint templates, indexed by dynamic class. Classes are tied to
// size so that a multi-class raster stays learnable from occupancy alone.
void class_template(std::int64_t class_id, double& length, double& width) {
  length = 4.0 + 2.2 * static_cast<double>(class_id - 1);
  width = 1.9 + 0.5 * static_cast<double>(class_id - 1);
}

constexpr int kPlacementAttempts = 100;
constexpr double kBoxSeparation = 1.0;  // min clearance between vehicles, meters

}  // namespace

BEVScene generate_scene(const ScenarioConfig& config, std::uint64_t seed) {
  config.validate();
  Rng rng = Rng(config.seed).split(seed);

  BEVScene scene;
  scene.region_size_m = config.region_size_m;
  scene.cell_size_m = config.cell_size_m;
  const double half = 0.5 * config.region_size_m;

  const std::int64_t target = rng.uniform_int(config.vehicle_count_min, config.vehicle_count_max);
  for (std::int64_t i = 0; i < target; ++i) {
    bool placed = false;
    for (int attempt = 0; attempt < kPlacementAttempts && !placed; ++attempt) {
      OrientedBox box;
      box.class_id = static_cast<int>(rng.uniform_int(1, config.num_classes_dynamic));
      double len, wid;
      class_template(box.class_id, len, wid);
      box.length = len * rng.uniform(0.9, 1.1);
      box.width = wid * rng.uniform(0.9, 1.1);
      box.yaw = rng.uniform(0.0, 6.283185307179586);
      const double reach = 0.5 * std::hypot(box.length, box.width);
      if (half - reach <= 0) continue;
      box.cx = rng.uniform(-(half - reach), half - reach);
      box.cy = rng.uniform(-(half - reach), half - reach);

      double corners[4][2];
      box_corners(box, 0.0, corners);
      bool ok = true;
      for (auto& corner : corners)
        ok = ok && std::fabs(corner[0]) <= half && std::fabs(corner[1]) <= half;
      for (const auto& other : scene.vehicles)
        ok = ok && !boxes_overlap(box, other, kBoxSeparation);
      if (ok) {
        scene.vehicles.push_back(box);
        placed = true;
      }
    }
    if (!placed)
      throw PlacementError("generate_scene: could not place vehicle " + std::to_string(i) + " of " +
                           std::to_string(target) + " after " + std::to_string(kPlacementAttempts) +
                           " attempts");
  }

  for (std::int64_t a = 0; a < config.num_agents; ++a) {
    bool placed = false;
    for (int attempt = 0; attempt < kPlacementAttempts && !placed; ++attempt) {
      Pose2 pose;
      pose.x = rng.uniform(-(half - 0.5), half - 0.5);
      pose.y = rng.uniform(-(half - 0.5), half - 0.5);
      pose.yaw = rng.uniform(0.0, 6.283185307179586);
      bool ok = true;
      for (const auto& box : scene.vehicles) {
        OrientedBox inflated = box;
        inflated.length += 1.0;
        inflated.width += 1.0;
        ok = ok && !inflated.contains(pose.x, pose.y);
      }
      if (ok) {
        scene.agent_poses.push_back(pose);
        placed = true;
      }
    }
    if (!placed)
      throw PlacementError("generate_scene: could not place agent " + std::to_string(a) + " after " +
                           std::to_string(kPlacementAttempts) + " attempts");
  }

  const std::int64_t n = config.grid_side();
  scene.gt_semantic = rasterize_boxes(scene.vehicles, Pose2{}, n, n, config.cell_size_m);
  return scene;
}

GridI compute_visibility(const GridI& occupied, double cell, double range_m, double fov_deg) {
  const std::int64_t h = occupied.h, w = occupied.w;
  GridI vis(h, w);

  // sparse list of occupied cell centers (sensor sits at the origin)
  std::vector<std::pair<double, double>> blockers;
  std::vector<std::int64_t> blocker_idx;
  for (std::int64_t r = 0; r < h; ++r)
    for (std::int64_t c = 0; c < w; ++c)
      if (occupied.at(r, c) != 0) {
        double x, y;
        cell_center(r, c, h, w, cell, x, y);
        blockers.emplace_back(x, y);
        blocker_idx.push_back(r * w + c);
      }

  const double half_fov = 0.5 * fov_deg * 0.017453292519943295;
  const double r2_limit = 0.25 * cell * cell;
  for (std::int64_t r = 0; r < h; ++r) {
    for (std::int64_t c = 0; c < w; ++c) {
      double px, py;
      cell_center(r, c, h, w, cell, px, py);
      const double dist = std::hypot(px, py);
      if (dist > range_m) continue;
      if (fov_deg < 360.0 && dist > 0.0 && std::fabs(std::atan2(py, px)) > half_fov) continue;

      const std::int64_t self = r * w + c;
      const double dd = px * px + py * py;
      bool blocked = false;
      for (std::size_t i = 0; i < blockers.size() && !blocked; ++i) {
        if (blocker_idx[i] == self) continue;
        const double qx = blockers[i].first, qy = blockers[i].second;
        if (dd <= 0.0) continue;
        const double t = (qx * px + qy * py) / dd;
        if (t <= 0.0 || t >= 1.0) continue;
        const double ex = qx - t * px, ey = qy - t * py;
        blocked = ex * ex + ey * ey < r2_limit;
      }
      if (!blocked) vis.at(r, c) = 1;
    }
  }
  return vis;
}

AgentObservation render_observation(const BEVScene& scene, std::int64_t agent_index,
                                    const ScenarioConfig& config, std::uint64_t seed) {
  config.validate();
  if (agent_index < 0 || agent_index >= static_cast<std::int64_t>(scene.agent_poses.size()))
    throw std::invalid_argument("render_observation: agent_index out of range");
  const std::int64_t n = config.grid_side();
  const Pose2& pose = scene.agent_poses[static_cast<std::size_t>(agent_index)];

  const GridI local_gt = rasterize_boxes(scene.vehicles, pose, n, n, config.cell_size_m);
  const GridI vis = compute_visibility(local_gt, config.cell_size_m, config.agent_range_m,
                                       config.agent_fov_deg);

  AgentObservation obs;
  obs.agent_index = agent_index;
  obs.grid = Tensor({kObsChannels, n, n});
  Rng rng = Rng(config.seed).split(seed).split(0x0b5ULL + static_cast<std::uint64_t>(agent_index));
  for (std::int64_t r = 0; r < n; ++r) {
    for (std::int64_t c = 0; c < n; ++c) {
      const double fg = local_gt.at(r, c) != 0 ? 1.0 : 0.0;
      const double n0 = rng.normal(0.0, config.obs_noise_std);
      const double n1 = rng.normal(0.0, config.obs_noise_std);
      if (vis.at(r, c) != 0) {
        obs.grid.at(0, r, c) = std::clamp(fg + n0, 0.0, 1.0);
        obs.grid.at(1, r, c) = 1.0;
        obs.grid.at(2, r, c) = std::clamp(fg + n1, 0.0, 1.0);
      }
    }
  }
  return obs;
}

}  // namespace world
}  // namespace hyperv2x
