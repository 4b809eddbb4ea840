// Acceptance suite. Each criterion prints one [PASS]/[FAIL] line; the binary
// exits nonzero if any requested criterion fails. Training-based criteria
// drive the artifact through the command line tool (HYPERV2X_CLI), so they
// verify exactly what an operator runs.

#include <sys/wait.h>

#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "hyperv2x/experiment.hpp"
#include "hyperv2x/io.hpp"
#include "hyperv2x/uncertainty.hpp"
#include "../oracles.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace hyperv2x;

namespace {

// -- harness -----------------------------------------------------------------

std::string g_cli;

int run_cli(const std::string& args) {
  const std::string cmd = g_cli + " " + args + " >/dev/null 2>&1";
  return WEXITSTATUS(std::system(cmd.c_str()));
}

void require_cli(const std::string& args, std::ostream& log) {
  const int rc = run_cli(args);
  if (rc != 0) {
    log << "cli command failed (rc=" << rc << "): " << args;
    throw std::runtime_error("cli failure");
  }
}

fs::path workspace(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("hv2x_acceptance_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

double median3(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  return v[v.size() / 2];
}

double spearman(const std::vector<double>& x, const std::vector<double>& y) {
  auto ranks = [](const std::vector<double>& v) {
    std::vector<double> r(v.size());
    for (std::size_t i = 0; i < v.size(); ++i)
      for (std::size_t j = 0; j < v.size(); ++j)
        if (v[j] < v[i] || (v[j] == v[i] && j < i)) r[i] += 1.0;
    return r;
  };
  const auto rx = ranks(x), ry = ranks(y);
  const double n = static_cast<double>(x.size());
  double d2 = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) d2 += (rx[i] - ry[i]) * (rx[i] - ry[i]);
  return 1.0 - 6.0 * d2 / (n * (n * n - 1.0));
}

json base_config(const fs::path& out_root) {
  return {
      {"scenario",
       {{"region_size_m", 16.0},
        {"cell_size_m", 0.5},
        {"num_agents", 3},
        {"vehicle_count_range", {1, 6}},
        {"agent_fov_deg", 360.0},
        {"agent_range_m", 20.0},
        {"obs_noise_std", 0.1},
        {"num_classes_dynamic", 1},
        {"seed", 7}}},
      {"dataset", {{"train_scenes", 200}, {"test_scenes", 40}}},
      {"features", {{"channels", 32}, {"enc_width1", 8}, {"enc_width2", 16}}},
      {"decoder", {{"hidden", 8}}},
      {"hypernet", {{"hidden", 64}, {"logvar_bias", -6.0}}},
      {"compression", {{"rate", 0}}},
      {"loss", {{"lambda_nll", 0.1}, {"lambda_kl", 0.001}, {"class_weights", {1.0, 2.0}}}},
      {"train",
       {{"epochs_pretrain", 6},
        {"epochs_finetune", 8},
        {"batch_size", 1},
        {"lr", 0.002},
        {"k_samples", 4},
        {"seed", 1}}},
      {"eval",
       {{"k_samples", 10}, {"m_bins", 15}, {"seed", 501}, {"num_panels", 0},
        {"mc_dropout_rate", 0.1}, {"mc_dropout_k", 20}}},
      {"output_dir", (out_root / "out").string()},
  };
}

void write_json(const json& j, const fs::path& path) {
  io::atomic_write(path, j.dump(2));
}

io::CsvData read_csv(const fs::path& p) { return io::parse_csv(io::read_file(p)); }

// -- criterion 1: invariant suite on randomized instances ---------------------

bool criterion1(std::ostream& log) {
  Rng rng(2026);
  int instances = 0;

  // simplex / U_A / U_E invariants over random stochastic predictions
  for (int trial = 0; trial < 400; ++trial, ++instances) {
    const std::int64_t k = rng.uniform_int(1, 6);
    const std::int64_t c = rng.uniform_int(2, 5);
    const std::int64_t side = rng.uniform_int(1, 6);
    dec::StochasticPrediction pred;
    pred.probs = Tensor({k, c, side, side});
    const std::int64_t hw = side * side;
    for (std::int64_t s = 0; s < k; ++s) {
      for (std::int64_t px = 0; px < hw; ++px) {
        double sum = 0.0;
        std::vector<double> raw(static_cast<std::size_t>(c));
        for (auto& x : raw) {
          x = -std::log(1.0 - rng.uniform());
          sum += x;
        }
        for (std::int64_t ch = 0; ch < c; ++ch)
          pred.probs[(s * c + ch) * hw + px] = raw[static_cast<std::size_t>(ch)] / sum;
      }
    }
    const Tensor mean = uq::mean_prediction(pred);
    for (std::int64_t px = 0; px < hw; ++px) {
      double sum = 0.0;
      for (std::int64_t ch = 0; ch < c; ++ch) sum += mean[ch * hw + px];
      if (std::fabs(sum - 1.0) > 1e-6) {
        log << "mean prediction off the simplex";
        return false;
      }
    }
    const Tensor ua = uq::aleatoric(mean);
    for (double x : ua.v)
      if (x < 0.0 || x > std::log(static_cast<double>(c)) + 1e-12) {
        log << "U_A outside [0, ln C]";
        return false;
      }
    const Tensor ue = uq::epistemic(pred);
    for (double x : ue.v)
      if (x < 0.0 || x > 0.25 + 1e-12) {
        log << "U_E outside [0, 0.25]";
        return false;
      }
    // identical samples must give exactly zero epistemic uncertainty
    dec::StochasticPrediction same;
    same.probs = Tensor({k, c, side, side});
    for (std::int64_t s = 0; s < k; ++s)
      std::copy(pred.probs.v.begin(), pred.probs.v.begin() + c * hw,
                same.probs.v.begin() + s * c * hw);
    for (double x : uq::epistemic(same).v)
      if (x != 0.0) {
        log << "U_E nonzero on identical samples";
        return false;
      }
  }

  // KL non-negativity with equality exactly at the prior
  for (int trial = 0; trial < 300; ++trial, ++instances) {
    const std::int64_t p = rng.uniform_int(1, 40);
    hyper::WeightPosterior post;
    post.mu = Tensor({p});
    post.log_var = Tensor({p});
    const bool at_prior = trial % 7 == 0;
    if (!at_prior)
      for (std::int64_t i = 0; i < p; ++i) {
        post.mu[i] = rng.normal();
        post.log_var[i] = std::clamp(2.0 * rng.normal(), hyper::kLogVarLo, hyper::kLogVarHi);
      }
    const double kl = train::kl_gaussian(post);
    if (kl < 0.0) {
      log << "negative KL";
      return false;
    }
    if (at_prior && kl != 0.0) {
      log << "KL nonzero at the prior";
      return false;
    }
  }

  // manifest tiling for random decoder specs
  for (int trial = 0; trial < 150; ++trial, ++instances) {
    dec::DecoderSpec spec;
    spec.in_channels = rng.uniform_int(1, 24);
    spec.hidden = rng.uniform_int(1, 24);
    spec.num_classes = rng.uniform_int(2, 6);
    const auto m = dec::WeightManifest::for_spec(spec);
    std::int64_t off = 0;
    for (const auto& e : m.entries) {
      if (e.offset != off) {
        log << "manifest slices not contiguous";
        return false;
      }
      off += e.length;
    }
    if (off != m.param_count || off != dec::param_count(spec)) {
      log << "manifest does not tile [0, P)";
      return false;
    }
    Tensor theta({m.param_count});
    for (auto& x : theta.v) x = rng.normal();
    if (dec::flatten_weights(dec::unflatten_weights(theta, m), m).v != theta.v) {
      log << "flatten/unflatten not the identity";
      return false;
    }
  }

  // ECE range on random confidence streams
  for (int trial = 0; trial < 150; ++trial, ++instances) {
    const auto n = rng.uniform_int(1, 200);
    std::vector<double> conf(static_cast<std::size_t>(n));
    std::vector<std::uint8_t> correct(static_cast<std::size_t>(n));
    for (auto& x : conf) x = rng.uniform();
    for (auto& x : correct) x = rng.uniform() < 0.5 ? 1 : 0;
    const double e = metrics::ece(conf, correct, rng.uniform_int(1, 25));
    if (e < 0.0 || e > 1.0) {
      log << "ECE outside [0,1]";
      return false;
    }
  }

  log << instances << " randomized instances";
  return instances >= 1000;
}

// -- criterion 2: gradient verification ---------------------------------------

bool criterion2(std::ostream& log) {
  world::ScenarioConfig wc;
  wc.region_size_m = 8.0;
  wc.cell_size_m = 1.0;  // 8x8 grid
  wc.num_agents = 2;
  wc.vehicle_count_min = 1;
  wc.vehicle_count_max = 1;
  wc.agent_range_m = 6.0;
  wc.obs_noise_std = 0.1;
  wc.num_classes_dynamic = 1;
  wc.seed = 31;
  const auto ds = world::build_dataset(wc, 77, 1);

  fusion::FeatureSpec f;
  f.channels = 6;
  f.grid_h = f.grid_w = 8;
  f.cell_size_m = 0.5;
  f.obs_channels = world::kObsChannels;
  f.enc_width1 = 4;
  f.enc_width2 = 6;
  dec::DecoderSpec d;
  d.in_channels = 6;
  d.hidden = 4;
  d.num_classes = 2;
  fusion::CompressionConfig cc;
  cc.rate = 2;

  Model m = Model::make(Variant::kHyper, f, d, cc, 12, -4.0, 5);
  train::LossWeights lw;
  lw.class_weights = {1.0, 2.0};

  // every coordinate of every parameter group, central differences, fixed eps
  const auto report = train::grad_check(m, ds.scenes[0], lw, 2, 2026, 1e-5, 0);
  std::int64_t total = 0;
  for (const auto& g : report.groups) total += g.checked;
  log << "max rel err " << report.max_rel_err << " over " << total << " coordinates in "
      << report.groups.size() << " groups";
  for (const auto& name : report.failing(1e-3)) log << "; failing group " << name;
  return report.ok(1e-3);
}

// -- criterion 3: oracle equivalences ------------------------------------------

bool criterion3(std::ostream& log) {
  // ECE vs brute force on 1000 random inputs
  Rng rng(99);
  for (int trial = 0; trial < 1000; ++trial) {
    const auto n = rng.uniform_int(1, 80);
    const auto m = rng.uniform_int(1, 25);
    std::vector<double> conf(static_cast<std::size_t>(n));
    std::vector<std::uint8_t> correct(static_cast<std::size_t>(n));
    for (auto& x : conf) x = rng.uniform();
    for (auto& x : correct) x = rng.uniform() < 0.6 ? 1 : 0;
    if (std::fabs(metrics::ece(conf, correct, m) - oracles::ece_bruteforce(conf, correct, m)) >
        1e-9) {
      log << "ECE disagrees with the brute-force oracle";
      return false;
    }
  }

  // occlusion: exact agreement with the exhaustive per-cell oracle up to 64x64
  world::ScenarioConfig wc;
  wc.seed = 3;
  for (const double region : {16.0, 32.0}) {
    wc.region_size_m = region;
    wc.vehicle_count_min = 2;
    wc.vehicle_count_max = region > 16.0 ? 7 : 4;
    const auto side = wc.grid_side();
    for (std::uint64_t seed = 0; seed < 4; ++seed) {
      const auto scene = world::generate_scene(wc, seed);
      for (std::size_t a = 0; a < scene.agent_poses.size(); ++a) {
        const auto local = world::rasterize_boxes(scene.vehicles, scene.agent_poses[a], side, side,
                                                  wc.cell_size_m);
        const auto fast =
            world::compute_visibility(local, wc.cell_size_m, wc.agent_range_m, 170.0);
        const auto slow =
            oracles::visibility_raymarch(local, wc.cell_size_m, wc.agent_range_m, 170.0);
        if (!(fast == slow)) {
          log << "visibility disagrees with the ray-march oracle on a " << side << "x" << side
              << " grid";
          return false;
        }
      }
    }
  }

  // epistemic / aleatoric hand cases at 1e-9
  dec::StochasticPrediction two;
  two.probs = Tensor({2, 2, 1, 1}, {0.6, 0.4, 0.8, 0.2});
  if (std::fabs(uq::epistemic(two)[0] - 0.01) > 1e-9) {
    log << "epistemic hand case failed";
    return false;
  }
  const Tensor mean = uq::mean_prediction(two);
  const double expect_ua = -(0.7 * std::log(0.7) + 0.3 * std::log(0.3));
  if (std::fabs(uq::aleatoric(mean)[0] - expect_ua) > 1e-9) {
    log << "aleatoric hand case failed";
    return false;
  }
  const Tensor uniform = Tensor::full({4, 1, 1}, 0.25);
  if (std::fabs(uq::aleatoric(uniform)[0] - std::log(4.0)) > 1e-9) {
    log << "max-entropy hand case failed";
    return false;
  }
  log << "ECE x1000, occlusion 32x32+64x64, Eq.11/12 hand cases";
  return true;
}

// -- criterion 4: context embedding beats noise conditioning -------------------

bool criterion4(std::ostream& log) {
  const fs::path ws = workspace("c4");
  std::vector<double> iou_ctx, iou_noise, ece_ctx, ece_noise;

  for (int seed : {1, 2, 3}) {
    json cfg = base_config(ws);
    cfg["train"]["seed"] = seed;
    cfg["scenario"]["seed"] = 7 + seed;
    const fs::path cfg_path = ws / ("cfg_s" + std::to_string(seed) + ".json");
    write_json(cfg, cfg_path);
    const std::string base = "--config " + cfg_path.string();
    const fs::path data = ws / ("data_s" + std::to_string(seed));
    const fs::path pre = ws / ("pre_s" + std::to_string(seed));

    require_cli("gen-data " + base + " --workers 2 --out " + data.string(), log);
    require_cli("pretrain " + base + " --data " + data.string() + " --out " + pre.string(), log);
    for (const std::string variant : {"hyper", "noise"}) {
      const fs::path out = ws / (variant + "_s" + std::to_string(seed));
      require_cli("train " + base + " --data " + data.string() + " --pretrained " +
                      (pre / "checkpoint.ckpt").string() + " --variant " + variant + " --out " +
                      out.string(),
                  log);
      const fs::path ev = ws / ("eval_" + variant + "_s" + std::to_string(seed));
      require_cli("eval " + base + " --data " + data.string() + " --checkpoint " +
                      (out / "checkpoint.ckpt").string() + " --out " + ev.string(),
                  log);
      const auto csv = read_csv(ev / "eval.csv");
      const double iou = csv.num(0, "iou"), ece = csv.num(0, "ece");
      if (variant == "hyper") {
        iou_ctx.push_back(iou);
        ece_ctx.push_back(ece);
      } else {
        iou_noise.push_back(iou);
        ece_noise.push_back(ece);
      }
    }
  }
  const double mi_c = median3(iou_ctx), mi_n = median3(iou_noise);
  const double me_c = median3(ece_ctx), me_n = median3(ece_noise);
  log << "median IoU context " << mi_c << " vs noise " << mi_n << "; median ECE context " << me_c
      << " vs noise " << me_n;
  return mi_c > mi_n && me_c < me_n;
}

// -- criterion 5: compression degradation trend --------------------------------

bool criterion5(std::ostream& log) {
  const fs::path ws = workspace("c5");
  const std::vector<double> rates = {0.0, 2.0, 8.0, 32.0};
  std::vector<double> rhos;
  std::vector<double> iou0s, iou32s;

  for (int seed : {1, 2, 3}) {
    json cfg = base_config(ws);
    cfg["train"]["seed"] = seed;
    cfg["scenario"]["seed"] = 11 + seed;
    const fs::path cfg_path = ws / ("cfg_s" + std::to_string(seed) + ".json");
    write_json(cfg, cfg_path);
    const std::string base = "--config " + cfg_path.string();
    const fs::path data = ws / ("data_s" + std::to_string(seed));
    const fs::path pre = ws / ("pre_s" + std::to_string(seed));
    require_cli("gen-data " + base + " --workers 2 --out " + data.string(), log);
    require_cli("pretrain " + base + " --data " + data.string() + " --out " + pre.string(), log);
    const fs::path ab = ws / ("ablate_s" + std::to_string(seed));
    require_cli("ablate-compression " + base + " --data " + data.string() + " --pretrained " +
                    (pre / "checkpoint.ckpt").string() + " --rates 0 2 8 32 --out " + ab.string(),
                log);
    const auto csv = read_csv(ab / "compression.csv");
    if (csv.rows.size() != 4) {
      log << "expected 4 rate rows";
      return false;
    }
    std::vector<double> nll;
    std::int64_t prev_cv = -1;
    for (std::size_t r = 0; r < 4; ++r) {
      nll.push_back(csv.num(r, "nll"));
      const auto cv = static_cast<std::int64_t>(csv.num(r, "cv_bytes"));
      if (prev_cv > 0 && cv >= prev_cv) {
        log << "communicated volume not strictly decreasing";
        return false;
      }
      prev_cv = cv;
    }
    rhos.push_back(spearman(rates, nll));
    iou0s.push_back(csv.num(0, "iou"));
    iou32s.push_back(csv.num(3, "iou"));
  }
  const double rho = median3(rhos);
  const double iou0 = median3(iou0s), iou32 = median3(iou32s);
  log << "median Spearman(rate, NLL) " << rho << "; median IoU rate0 " << iou0 << " vs rate32 "
      << iou32;
  return rho >= 0.7 && iou32 <= iou0;
}

// -- criterion 6: fusion benefit under cross-agent occlusion -------------------

bool criterion6(std::ostream& log) {
  const fs::path ws = workspace("c6");
  std::vector<double> gains;
  for (int seed : {1, 2, 3}) {
    json cfg = base_config(ws);
    cfg["scenario"]["agent_fov_deg"] = 180.0;
    cfg["scenario"]["agent_range_m"] = 8.0;
    cfg["scenario"]["vehicle_count_range"] = {3, 6};
    cfg["scenario"]["seed"] = 23 + seed;
    cfg["dataset"] = {{"train_scenes", 120}, {"test_scenes", 30}};
    cfg["train"]["seed"] = seed;
    const fs::path cfg_path = ws / ("cfg_s" + std::to_string(seed) + ".json");
    write_json(cfg, cfg_path);
    const std::string base = "--config " + cfg_path.string();
    const fs::path data = ws / ("data_s" + std::to_string(seed));
    const fs::path pre = ws / ("pre_s" + std::to_string(seed));
    const fs::path model = ws / ("hyper_s" + std::to_string(seed));
    require_cli("gen-data " + base + " --workers 2 --out " + data.string(), log);
    require_cli("pretrain " + base + " --data " + data.string() + " --out " + pre.string(), log);
    require_cli("train " + base + " --data " + data.string() + " --pretrained " +
                    (pre / "checkpoint.ckpt").string() + " --variant hyper --out " +
                    model.string(),
                log);
    double iou_fused = 0.0, iou_ego = 0.0;
    for (const std::string mode : {"all", "ego_only"}) {
      const fs::path ev = ws / ("eval_" + mode + "_s" + std::to_string(seed));
      require_cli("eval " + base + " --data " + data.string() + " --checkpoint " +
                      (model / "checkpoint.ckpt").string() + " --fusion " + mode + " --out " +
                      ev.string(),
                  log);
      const double iou = read_csv(ev / "eval.csv").num(0, "iou");
      (mode == "all" ? iou_fused : iou_ego) = iou;
    }
    gains.push_back(iou_fused - iou_ego);
  }
  const double gain = median3(gains);
  log << "median fused-vs-ego IoU gain " << gain * 100.0 << " points";
  return gain >= 0.05;
}

// -- criterion 7: MC-dropout baseline shape -------------------------------------

bool criterion7(std::ostream& log) {
  const fs::path ws = workspace("c7");
  const std::vector<double> rates = {0.1, 0.3, 0.5, 0.7};
  std::vector<std::vector<double>> iou_by_rate(4);

  for (int seed : {1, 2, 3}) {
    json cfg = base_config(ws);
    cfg["train"]["seed"] = seed;
    cfg["scenario"]["seed"] = 37 + seed;
    const fs::path cfg_path = ws / ("cfg_s" + std::to_string(seed) + ".json");
    write_json(cfg, cfg_path);
    const std::string base = "--config " + cfg_path.string();
    const fs::path data = ws / ("data_s" + std::to_string(seed));
    const fs::path pre = ws / ("pre_s" + std::to_string(seed));
    require_cli("gen-data " + base + " --workers 2 --out " + data.string(), log);
    require_cli("pretrain " + base + " --data " + data.string() + " --out " + pre.string(), log);

    for (std::size_t r = 0; r < rates.size(); ++r) {
      json rate_cfg = cfg;
      rate_cfg["eval"]["mc_dropout_rate"] = rates[r];
      rate_cfg["eval"]["mc_dropout_k"] = 20;
      const fs::path rate_cfg_path =
          ws / ("cfg_s" + std::to_string(seed) + "_r" + std::to_string(r) + ".json");
      write_json(rate_cfg, rate_cfg_path);
      const std::string rate_base = "--config " + rate_cfg_path.string();
      const fs::path model = ws / ("mc_s" + std::to_string(seed) + "_r" + std::to_string(r));
      require_cli("train " + rate_base + " --data " + data.string() + " --pretrained " +
                      (pre / "checkpoint.ckpt").string() + " --variant mcdropout --out " +
                      model.string(),
                  log);
      const fs::path ev = ws / ("eval_s" + std::to_string(seed) + "_r" + std::to_string(r));
      require_cli("eval " + rate_base + " --data " + data.string() + " --checkpoint " +
                      (model / "checkpoint.ckpt").string() + " --out " + ev.string(),
                  log);
      // the report must be complete
      const auto report = json::parse(io::read_file(ev / "report.json"));
      for (const char* field : {"vehicle_iou", "ece", "brier", "nll", "bins", "ue_mean",
                                "ua_mean", "m_bins", "cv_bytes"})
        if (!report.contains(field)) {
          log << "incomplete CalibrationReport: missing " << field;
          return false;
        }
      if (report.at("bins").size() != 15) {
        log << "reliability table has wrong bin count";
        return false;
      }
      iou_by_rate[r].push_back(report.at("vehicle_iou").get<double>());
    }
  }
  std::vector<double> medians;
  for (auto& v : iou_by_rate) medians.push_back(median3(v));
  log << "median IoU by dropout rate:";
  for (std::size_t r = 0; r < 4; ++r) log << " " << rates[r] << "->" << medians[r];
  for (std::size_t r = 1; r < 4; ++r)
    if (medians[r] > medians[r - 1] + 1e-12) return false;
  return true;
}

// -- criterion 8: CLI rerun determinism ------------------------------------------

bool criterion8(std::ostream& log) {
  const fs::path ws = workspace("c8");
  json cfg = base_config(ws);
  cfg["scenario"]["region_size_m"] = 10.0;
  cfg["scenario"]["vehicle_count_range"] = {1, 2};
  cfg["scenario"]["num_agents"] = 2;
  cfg["dataset"] = {{"train_scenes", 6}, {"test_scenes", 3}};
  cfg["features"] = {{"channels", 8}, {"enc_width1", 4}, {"enc_width2", 6}};
  cfg["decoder"] = {{"hidden", 4}};
  cfg["hypernet"] = {{"hidden", 12}, {"logvar_bias", -6.0}};
  cfg["train"]["epochs_pretrain"] = 2;
  cfg["train"]["epochs_finetune"] = 2;
  cfg["train"]["k_samples"] = 2;
  cfg["eval"]["k_samples"] = 3;
  cfg["eval"]["num_panels"] = 0;
  const fs::path cfg_path = ws / "cfg.json";
  write_json(cfg, cfg_path);
  const std::string base = "--config " + cfg_path.string();

  auto pipeline = [&](const std::string& tag) {
    const fs::path data = ws / ("data_" + tag);
    const fs::path pre = ws / ("pre_" + tag);
    const fs::path model = ws / ("train_" + tag);
    const fs::path ev = ws / ("eval_" + tag);
    const fs::path ab = ws / ("ablate_" + tag);
    require_cli("gen-data " + base + " --out " + data.string(), log);
    require_cli("pretrain " + base + " --data " + data.string() + " --out " + pre.string(), log);
    require_cli("train " + base + " --data " + data.string() + " --pretrained " +
                    (pre / "checkpoint.ckpt").string() + " --variant hyper --out " +
                    model.string(),
                log);
    require_cli("eval " + base + " --data " + data.string() + " --checkpoint " +
                    (model / "checkpoint.ckpt").string() + " --out " + ev.string(),
                log);
    require_cli("ablate-compression " + base + " --data " + data.string() + " --pretrained " +
                    (pre / "checkpoint.ckpt").string() + " --rates 0 2 --out " + ab.string(),
                log);
  };
  pipeline("a");
  pipeline("b");

  const std::vector<std::pair<std::string, std::string>> files = {
      {"pre_a/curve.csv", "pre_b/curve.csv"},
      {"train_a/curve.csv", "train_b/curve.csv"},
      {"eval_a/eval.csv", "eval_b/eval.csv"},
      {"eval_a/report.json", "eval_b/report.json"},
      {"ablate_a/compression.csv", "ablate_b/compression.csv"},
      {"data_a/train/manifest.json", "data_b/train/manifest.json"},
  };
  for (const auto& [a, b] : files) {
    if (io::read_file(ws / a) != io::read_file(ws / b)) {
      log << "rerun differs: " << a;
      return false;
    }
  }
  log << "gen-data/pretrain/train/eval/ablate reruns byte-identical across "
      << files.size() << " outputs";
  return true;
}

struct Criterion {
  int id;
  std::string name;
  std::function<bool(std::ostream&)> run;
};

}  // namespace

int main(int argc, char** argv) {
  int only = 0;
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if (arg == "--criterion" && i + 1 < argc) only = std::atoi(argv[++i]);
  }
  if (const char* cli = std::getenv("HYPERV2X_CLI"); cli != nullptr) g_cli = cli;

  const std::vector<Criterion> criteria = {
      {1, "invariant suite on 1000 randomized instances", criterion1},
      {2, "gradient verification vs central finite differences", criterion2},
      {3, "oracle equivalence (ECE, occlusion, Eq. 11/12)", criterion3},
      {4, "context embedding dominates noise conditioning", criterion4},
      {5, "compression degradation trend", criterion5},
      {6, "multi-agent fusion IoU benefit", criterion6},
      {7, "MC-dropout baseline reports and IoU ordering", criterion7},
      {8, "CLI rerun determinism", criterion8},
  };

  bool all_ok = true;
  for (const auto& c : criteria) {
    if (only != 0 && c.id != only) continue;
    if (c.id >= 4 && g_cli.empty()) {
      std::cout << "[FAIL] criterion " << c.id << ": " << c.name
                << " (HYPERV2X_CLI not set)" << std::endl;
      all_ok = false;
      continue;
    }
    const auto t0 = std::chrono::steady_clock::now();
    std::ostringstream detail;
    bool ok = false;
    try {
      ok = c.run(detail);
    } catch (const std::exception& e) {
      detail << " exception: " << e.what();
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::cout << (ok ? "[PASS]" : "[FAIL]") << " criterion " << c.id << ": " << c.name << " ("
              << detail.str() << ", " << static_cast<int>(secs) << "s)" << std::endl;
    all_ok = all_ok && ok;
  }
  return all_ok ? 0 : 1;
}
