// Python bindings for the main operations: scene generation, the fused
// feature pipeline, posterior sampling, uncertainty maps and metrics.
// Heavy work stays in C++; numpy arrays are copied at the boundary.

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "hyperv2x/baselines.hpp"
#include "hyperv2x/checkpoint.hpp"
#include "hyperv2x/dataset.hpp"
#include "hyperv2x/metrics.hpp"
#include "hyperv2x/uncertainty.hpp"
#include "hyperv2x/version.hpp"

namespace py = pybind11;
using namespace hyperv2x;

namespace {

py::array_t<double> tensor_to_numpy(const Tensor& t) {
  std::vector<py::ssize_t> shape(t.shape.begin(), t.shape.end());
  py::array_t<double> out(shape);
  std::copy(t.v.begin(), t.v.end(), out.mutable_data());
  return out;
}

Tensor numpy_to_tensor(const py::array_t<double, py::array::c_style | py::array::forcecast>& a) {
  std::vector<std::int64_t> shape(a.ndim());
  for (py::ssize_t i = 0; i < a.ndim(); ++i) shape[static_cast<std::size_t>(i)] = a.shape(i);
  Tensor t(shape);
  std::copy(a.data(), a.data() + a.size(), t.v.begin());
  return t;
}

py::array_t<std::int32_t> grid_to_numpy(const GridI& g) {
  py::array_t<std::int32_t> out({static_cast<py::ssize_t>(g.h), static_cast<py::ssize_t>(g.w)});
  std::copy(g.v.begin(), g.v.end(), out.mutable_data());
  return out;
}

GridI numpy_to_grid(const py::array_t<std::int32_t, py::array::c_style | py::array::forcecast>& a) {
  if (a.ndim() != 2) throw std::invalid_argument("expected a 2-d integer grid");
  GridI g(a.shape(0), a.shape(1));
  std::copy(a.data(), a.data() + a.size(), g.v.begin());
  return g;
}

dec::StochasticPrediction numpy_to_pred(
    const py::array_t<double, py::array::c_style | py::array::forcecast>& a) {
  if (a.ndim() != 4) throw std::invalid_argument("expected probs of shape [K,C,H,W]");
  dec::StochasticPrediction pred;
  pred.probs = numpy_to_tensor(a);
  return pred;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Hyper-V2X core: cooperative BEV segmentation with hypernetwork uncertainty";
  m.attr("__version__") = kVersion;

  py::class_<world::ScenarioConfig>(m, "ScenarioConfig")
      .def(py::init<>())
      .def_readwrite("region_size_m", &world::ScenarioConfig::region_size_m)
      .def_readwrite("cell_size_m", &world::ScenarioConfig::cell_size_m)
      .def_readwrite("num_agents", &world::ScenarioConfig::num_agents)
      .def_readwrite("vehicle_count_min", &world::ScenarioConfig::vehicle_count_min)
      .def_readwrite("vehicle_count_max", &world::ScenarioConfig::vehicle_count_max)
      .def_readwrite("agent_fov_deg", &world::ScenarioConfig::agent_fov_deg)
      .def_readwrite("agent_range_m", &world::ScenarioConfig::agent_range_m)
      .def_readwrite("obs_noise_std", &world::ScenarioConfig::obs_noise_std)
      .def_readwrite("num_classes_dynamic", &world::ScenarioConfig::num_classes_dynamic)
      .def_readwrite("seed", &world::ScenarioConfig::seed)
      .def("grid_side", &world::ScenarioConfig::grid_side)
      .def("validate", &world::ScenarioConfig::validate);

  py::class_<world::BEVScene>(m, "BEVScene")
      .def_property_readonly("gt_semantic",
                             [](const world::BEVScene& s) { return grid_to_numpy(s.gt_semantic); })
      .def_property_readonly("agent_poses",
                             [](const world::BEVScene& s) {
                               py::array_t<double> out(
                                   {static_cast<py::ssize_t>(s.agent_poses.size()),
                                    static_cast<py::ssize_t>(3)});
                               auto* p = out.mutable_data();
                               for (const auto& pose : s.agent_poses) {
                                 *p++ = pose.x;
                                 *p++ = pose.y;
                                 *p++ = pose.yaw;
                               }
                               return out;
                             })
      .def_property_readonly("num_vehicles",
                             [](const world::BEVScene& s) { return s.vehicles.size(); });

  m.def("generate_scene", &world::generate_scene, py::arg("config"), py::arg("seed"));
  m.def(
      "render_observation",
      [](const world::BEVScene& scene, std::int64_t agent, const world::ScenarioConfig& cfg,
         std::uint64_t seed) {
        return tensor_to_numpy(world::render_observation(scene, agent, cfg, seed).grid);
      },
      py::arg("scene"), py::arg("agent_index"), py::arg("config"), py::arg("seed"));
  m.def("rasterize_gt",
        [](const world::BEVScene& s) { return grid_to_numpy(world::rasterize_gt(s)); });

  m.def(
      "noise_condition",
      [](std::int64_t dim, double std, std::uint64_t seed) {
        return tensor_to_numpy(hyper::noise_condition(dim, std, seed));
      },
      py::arg("dim"), py::arg("std"), py::arg("seed"));
  m.def(
      "context_embed",
      [](const py::array_t<double, py::array::c_style | py::array::forcecast>& g) {
        return tensor_to_numpy(hyper::context_embed(numpy_to_tensor(g)));
      },
      py::arg("fused_features"));

  m.def(
      "mean_prediction",
      [](const py::array_t<double, py::array::c_style | py::array::forcecast>& probs) {
        return tensor_to_numpy(uq::mean_prediction(numpy_to_pred(probs)));
      },
      py::arg("probs"));
  m.def(
      "epistemic",
      [](const py::array_t<double, py::array::c_style | py::array::forcecast>& probs) {
        return tensor_to_numpy(uq::epistemic(numpy_to_pred(probs)));
      },
      py::arg("probs"));
  m.def(
      "aleatoric",
      [](const py::array_t<double, py::array::c_style | py::array::forcecast>& mean_probs) {
        return tensor_to_numpy(uq::aleatoric(numpy_to_tensor(mean_probs)));
      },
      py::arg("mean_probs"));

  m.def(
      "iou",
      [](const py::array_t<bool, py::array::c_style | py::array::forcecast>& pred,
         const py::array_t<bool, py::array::c_style | py::array::forcecast>& gt) {
        std::vector<std::uint8_t> p(pred.data(), pred.data() + pred.size());
        std::vector<std::uint8_t> g(gt.data(), gt.data() + gt.size());
        return metrics::iou(p, g);
      },
      py::arg("pred"), py::arg("gt"));
  m.def(
      "ece",
      [](const std::vector<double>& conf, const std::vector<bool>& correct, std::int64_t m_bins) {
        std::vector<std::uint8_t> c(correct.begin(), correct.end());
        return metrics::ece(conf, c, m_bins);
      },
      py::arg("confidences"), py::arg("correctness"), py::arg("m_bins") = 15);
  m.def(
      "brier",
      [](const py::array_t<double, py::array::c_style | py::array::forcecast>& probs,
         const py::array_t<std::int32_t, py::array::c_style | py::array::forcecast>& labels) {
        return metrics::brier(numpy_to_tensor(probs), numpy_to_grid(labels));
      },
      py::arg("mean_probs"), py::arg("labels"));
  m.def(
      "nll",
      [](const py::array_t<double, py::array::c_style | py::array::forcecast>& probs,
         const py::array_t<std::int32_t, py::array::c_style | py::array::forcecast>& labels) {
        return metrics::nll(numpy_to_tensor(probs), numpy_to_grid(labels));
      },
      py::arg("mean_probs"), py::arg("labels"));

  // end-to-end: load a checkpoint and predict one scene of a saved dataset
  m.def(
      "predict_scene",
      [](const std::string& checkpoint, const std::string& dataset_dir, std::size_t scene_index,
         std::int64_t k, std::uint64_t seed, bool ego_only) {
        const auto loaded = ckpt::load(checkpoint);
        const auto ds = world::load_dataset(dataset_dir);
        if (scene_index >= ds.scenes.size())
          throw std::out_of_range("scene_index out of range");
        const auto out = predict_scene(loaded.model, ds.scenes[scene_index], k, seed, ego_only);
        return tensor_to_numpy(out.pred.probs);
      },
      py::arg("checkpoint"), py::arg("dataset_dir"), py::arg("scene_index") = 0,
      py::arg("k") = 10, py::arg("seed") = 0, py::arg("ego_only") = false);
}
