#pragma once

#include <json.hpp>

#include "hyperv2x/synthworld.hpp"

namespace hyperv2x::world {

inline void to_json(nlohmann::json& j, const ScenarioConfig& c) {
  j = nlohmann::json{{"region_size_m", c.region_size_m},
                     {"cell_size_m", c.cell_size_m},
                     {"num_agents", c.num_agents},
                     {"vehicle_count_range", {c.vehicle_count_min, c.vehicle_count_max}},
                     {"agent_fov_deg", c.agent_fov_deg},
                     {"agent_range_m", c.agent_range_m},
                     {"obs_noise_std", c.obs_noise_std},
                     {"num_classes_dynamic", c.num_classes_dynamic},
                     {"seed", c.seed}};
}

inline void from_json(const nlohmann::json& j, ScenarioConfig& c) {
  j.at("region_size_m").get_to(c.region_size_m);
  j.at("cell_size_m").get_to(c.cell_size_m);
  j.at("num_agents").get_to(c.num_agents);
  c.vehicle_count_min = j.at("vehicle_count_range").at(0).get<std::int64_t>();
  c.vehicle_count_max = j.at("vehicle_count_range").at(1).get<std::int64_t>();
  j.at("agent_fov_deg").get_to(c.agent_fov_deg);
  j.at("agent_range_m").get_to(c.agent_range_m);
  j.at("obs_noise_std").get_to(c.obs_noise_std);
  j.at("num_classes_dynamic").get_to(c.num_classes_dynamic);
  j.at("seed").get_to(c.seed);
}

}  // namespace hyperv2x::world
