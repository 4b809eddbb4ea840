#include "hyperv2x/dataset.hpp"

#include <algorithm>
#include <cstdio>
#include <thread>

#include "hyperv2x/io.hpp"
#include "hyperv2x/json_conv.hpp"

namespace hyperv2x::world {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

SceneRecord build_scene_record(const ScenarioConfig& config, std::uint64_t scene_seed) {
  SceneRecord rec;
  rec.scene_seed = scene_seed;
  rec.scene = generate_scene(config, scene_seed);
  for (std::int64_t a = 0; a < config.num_agents; ++a)
    rec.observations.push_back(render_observation(rec.scene, a, config, scene_seed));
  return rec;
}

}  // namespace

Dataset build_dataset(const ScenarioConfig& config, std::uint64_t base_seed, std::int64_t count,
                      int workers) {
  config.validate();
  Dataset ds;
  ds.config = config;
  ds.base_seed = base_seed;
  ds.scenes.resize(static_cast<std::size_t>(count));
  workers = std::max(1, std::min<int>(workers, static_cast<int>(std::max<std::int64_t>(count, 1))));
  if (workers == 1) {
    for (std::int64_t i = 0; i < count; ++i)
      ds.scenes[static_cast<std::size_t>(i)] =
          build_scene_record(config, base_seed + static_cast<std::uint64_t>(i));
    return ds;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(workers));
  for (int t = 0; t < workers; ++t) {
    pool.emplace_back([&, t]() {
      try {
        for (std::int64_t i = t; i < count; i += workers)
          ds.scenes[static_cast<std::size_t>(i)] =
              build_scene_record(config, base_seed + static_cast<std::uint64_t>(i));
      } catch (...) {
        errors[static_cast<std::size_t>(t)] = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  for (const auto& err : errors)
    if (err) std::rethrow_exception(err);
  return ds;
}

namespace {

io::ArrayBundle scene_to_bundle(const SceneRecord& rec) {
  io::ArrayBundle b;
  b.i32["gt_semantic"] = rec.scene.gt_semantic;

  const auto v = static_cast<std::int64_t>(rec.scene.agent_poses.size());
  Tensor poses({v, 3});
  for (std::int64_t i = 0; i < v; ++i) {
    poses.at(i, 0) = rec.scene.agent_poses[static_cast<std::size_t>(i)].x;
    poses.at(i, 1) = rec.scene.agent_poses[static_cast<std::size_t>(i)].y;
    poses.at(i, 2) = rec.scene.agent_poses[static_cast<std::size_t>(i)].yaw;
  }
  b.f64["agent_poses"] = std::move(poses);

  const auto nb = static_cast<std::int64_t>(rec.scene.vehicles.size());
  Tensor boxes({nb, 6});
  for (std::int64_t i = 0; i < nb; ++i) {
    const auto& box = rec.scene.vehicles[static_cast<std::size_t>(i)];
    boxes.at(i, 0) = box.cx;
    boxes.at(i, 1) = box.cy;
    boxes.at(i, 2) = box.length;
    boxes.at(i, 3) = box.width;
    boxes.at(i, 4) = box.yaw;
    boxes.at(i, 5) = static_cast<double>(box.class_id);
  }
  b.f64["vehicles"] = std::move(boxes);

  for (std::size_t a = 0; a < rec.observations.size(); ++a) {
    char name[32];
    std::snprintf(name, sizeof(name), "obs_%03zu", a);
    b.f64[name] = rec.observations[a].grid;
  }
  b.f64["meta"] = Tensor({3}, {static_cast<double>(rec.scene_seed), rec.scene.region_size_m,
                               rec.scene.cell_size_m});
  return b;
}

SceneRecord scene_from_bundle(const io::ArrayBundle& b) {
  SceneRecord rec;
  const Tensor& meta = b.f64.at("meta");
  rec.scene_seed = static_cast<std::uint64_t>(meta[0]);
  rec.scene.region_size_m = meta[1];
  rec.scene.cell_size_m = meta[2];
  rec.scene.gt_semantic = b.i32.at("gt_semantic");

  const Tensor& poses = b.f64.at("agent_poses");
  for (std::int64_t i = 0; i < poses.dim(0); ++i)
    rec.scene.agent_poses.push_back({poses.at(i, 0), poses.at(i, 1), poses.at(i, 2)});

  const Tensor& boxes = b.f64.at("vehicles");
  for (std::int64_t i = 0; i < boxes.dim(0); ++i) {
    OrientedBox box;
    box.cx = boxes.at(i, 0);
    box.cy = boxes.at(i, 1);
    box.length = boxes.at(i, 2);
    box.width = boxes.at(i, 3);
    box.yaw = boxes.at(i, 4);
    box.class_id = static_cast<int>(boxes.at(i, 5));
    rec.scene.vehicles.push_back(box);
  }

  for (std::size_t a = 0;; ++a) {
    char name[32];
    std::snprintf(name, sizeof(name), "obs_%03zu", a);
    auto it = b.f64.find(name);
    if (it == b.f64.end()) break;
    AgentObservation obs;
    obs.agent_index = static_cast<std::int64_t>(a);
    obs.grid = it->second;
    rec.observations.push_back(std::move(obs));
  }
  return rec;
}

}  // namespace

void save_dataset(const Dataset& ds, const fs::path& dir) {
  fs::create_directories(dir);
  json manifest;
  manifest["schema_version"] = "hyperv2x-dataset-v1";
  manifest["config"] = ds.config;
  manifest["base_seed"] = ds.base_seed;
  manifest["scene_count"] = ds.scenes.size();
  json scene_list = json::array();
  for (std::size_t i = 0; i < ds.scenes.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof(name), "scene_%05zu.tns", i);
    const auto bytes = scene_to_bundle(ds.scenes[i]).encode();
    io::atomic_write(dir / name, bytes);
    scene_list.push_back({{"file", name},
                          {"seed", ds.scenes[i].scene_seed},
                          {"fnv64", io::hex64(io::fnv1a(bytes.data(), bytes.size()))}});
  }
  manifest["scenes"] = scene_list;
  io::atomic_write(dir / "manifest.json", manifest.dump(2) + "\n");
}

Dataset load_dataset(const fs::path& dir) {
  const json manifest = json::parse(io::read_file(dir / "manifest.json"));
  if (manifest.at("schema_version").get<std::string>() != "hyperv2x-dataset-v1")
    throw std::runtime_error("load_dataset: unsupported manifest schema");
  Dataset ds;
  ds.config = manifest.at("config").get<ScenarioConfig>();
  ds.base_seed = manifest.at("base_seed").get<std::uint64_t>();
  for (const auto& entry : manifest.at("scenes")) {
    const auto file = entry.at("file").get<std::string>();
    const std::string bytes = io::read_file(dir / file);
    const auto digest = io::hex64(io::fnv1a(bytes.data(), bytes.size()));
    if (digest != entry.at("fnv64").get<std::string>())
      throw std::runtime_error("load_dataset: checksum mismatch for " + file);
    auto bundle = io::ArrayBundle::decode(std::vector<std::uint8_t>(bytes.begin(), bytes.end()));
    ds.scenes.push_back(scene_from_bundle(bundle));
  }
  return ds;
}

}  // namespace hyperv2x::world
