// Black-box integration tests of the command line tool: every verb runs on a
// miniature config, outputs land atomically, failures exit nonzero with a
// one-line error, and reruns are byte-identical.

#include <doctest.h>

#include <json.hpp>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <string>

#include "hyperv2x/io.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string cli_path() {
  const char* p = std::getenv("HYPERV2X_CLI");
  REQUIRE_MESSAGE(p != nullptr, "HYPERV2X_CLI must point at the built binary");
  return p;
}

int run(const std::string& args, std::string* log = nullptr) {
  const fs::path logfile = fs::temp_directory_path() / "hv2x_cli_log.txt";
  const std::string cmd = cli_path() + " " + args + " >" + logfile.string() + " 2>&1";
  const int rc = std::system(cmd.c_str());
  if (log != nullptr) *log = hyperv2x::io::read_file(logfile);
  return WEXITSTATUS(rc);
}

struct Workspace {
  fs::path root;
  Workspace() {
    root = fs::temp_directory_path() / "hv2x_cli_ws";
    fs::remove_all(root);
    fs::create_directories(root);
  }
  ~Workspace() { fs::remove_all(root); }
};

json mini_config(const fs::path& root) {
  return {
      {"scenario",
       {{"region_size_m", 10.0},
        {"cell_size_m", 0.5},
        {"num_agents", 2},
        {"vehicle_count_range", {1, 2}},
        {"agent_fov_deg", 360.0},
        {"agent_range_m", 12.0},
        {"obs_noise_std", 0.05},
        {"num_classes_dynamic", 1},
        {"seed", 3}}},
      {"dataset", {{"train_scenes", 6}, {"test_scenes", 3}}},
      {"features", {{"channels", 8}, {"enc_width1", 4}, {"enc_width2", 6}}},
      {"decoder", {{"hidden", 4}}},
      {"hypernet", {{"hidden", 12}, {"logvar_bias", -6.0}}},
      {"compression", {{"rate", 0}}},
      {"loss", {{"lambda_nll", 0.1}, {"lambda_kl", 0.001}, {"class_weights", {1.0, 2.0}}}},
      {"train",
       {{"epochs_pretrain", 2},
        {"epochs_finetune", 2},
        {"batch_size", 1},
        {"lr", 0.002},
        {"k_samples", 2},
        {"seed", 1}}},
      {"eval", {{"k_samples", 3}, {"m_bins", 10}, {"seed", 44}, {"num_panels", 1}}},
      {"output_dir", (root / "default_out").string()},
  };
}

void write_config(const json& j, const fs::path& path) {
  hyperv2x::io::atomic_write(path, j.dump(2));
}

}  // namespace

TEST_CASE("cli end-to-end: gen-data, pretrain, train, eval, rerun determinism") {
  Workspace ws;
  const fs::path cfg_path = ws.root / "config.json";
  write_config(mini_config(ws.root), cfg_path);

  const std::string base = "--config " + cfg_path.string();
  std::string log;

  REQUIRE(run("gen-data " + base + " --out " + (ws.root / "data").string(), &log) == 0);
  CHECK(fs::exists(ws.root / "data" / "train" / "manifest.json"));
  CHECK(fs::exists(ws.root / "data" / "test" / "manifest.json"));
  CHECK(fs::exists(ws.root / "data" / "config.json"));
  CHECK(fs::exists(ws.root / "data" / "version.txt"));
  CHECK_FALSE(fs::exists(ws.root / "data.tmp"));

  REQUIRE(run("pretrain " + base + " --data " + (ws.root / "data").string() + " --out " +
                  (ws.root / "pre").string(),
              &log) == 0);
  CHECK(fs::exists(ws.root / "pre" / "checkpoint.ckpt"));
  CHECK(fs::exists(ws.root / "pre" / "curve.csv"));

  REQUIRE(run("train " + base + " --data " + (ws.root / "data").string() + " --pretrained " +
                  (ws.root / "pre" / "checkpoint.ckpt").string() + " --variant hyper --out " +
                  (ws.root / "hyper").string(),
              &log) == 0);
  CHECK(fs::exists(ws.root / "hyper" / "checkpoint.ckpt"));

  // curve schema parses back
  const auto curve = hyperv2x::io::parse_csv(
      hyperv2x::io::read_file(ws.root / "hyper" / "curve.csv"));
  CHECK(curve.schema == "hyperv2x-curve-v1");
  CHECK(curve.rows.size() == 2);

  REQUIRE(run("eval " + base + " --data " + (ws.root / "data").string() + " --checkpoint " +
                  (ws.root / "hyper" / "checkpoint.ckpt").string() + " --out " +
                  (ws.root / "eval1").string(),
              &log) == 0);
  CHECK(fs::exists(ws.root / "eval1" / "report.json"));
  CHECK(fs::exists(ws.root / "eval1" / "eval.csv"));
  CHECK(fs::exists(ws.root / "eval1" / "panels" / "scene_000_ue.png"));
  CHECK(fs::exists(ws.root / "eval1" / "panels" / "scene_000_scale.json"));

  const auto report = json::parse(hyperv2x::io::read_file(ws.root / "eval1" / "report.json"));
  CHECK(report.at("ece").get<double>() >= 0.0);
  CHECK(report.at("ece").get<double>() <= 1.0);
  CHECK(report.at("model").get<std::string>() == "hyper");

  // rerunning with identical config + seed must be byte-identical
  REQUIRE(run("eval " + base + " --data " + (ws.root / "data").string() + " --checkpoint " +
                  (ws.root / "hyper" / "checkpoint.ckpt").string() + " --out " +
                  (ws.root / "eval2").string(),
              &log) == 0);
  CHECK(hyperv2x::io::read_file(ws.root / "eval1" / "eval.csv") ==
        hyperv2x::io::read_file(ws.root / "eval2" / "eval.csv"));
  CHECK(hyperv2x::io::read_file(ws.root / "eval1" / "report.json") ==
        hyperv2x::io::read_file(ws.root / "eval2" / "report.json"));

  // ego-only evaluation exercises the no-fusion path
  REQUIRE(run("eval " + base + " --data " + (ws.root / "data").string() + " --checkpoint " +
                  (ws.root / "hyper" / "checkpoint.ckpt").string() + " --fusion ego_only --out " +
                  (ws.root / "eval_ego").string(),
              &log) == 0);
  const auto ego_report =
      json::parse(hyperv2x::io::read_file(ws.root / "eval_ego" / "report.json"));
  CHECK(ego_report.at("model").get<std::string>() == "hyper+ego_only");
}

TEST_CASE("cli ablate-compression emits a rate-ordered table-2 csv") {
  Workspace ws;
  const fs::path cfg_path = ws.root / "config.json";
  write_config(mini_config(ws.root), cfg_path);
  const std::string base = "--config " + cfg_path.string();
  std::string log;

  REQUIRE(run("gen-data " + base + " --out " + (ws.root / "data").string(), &log) == 0);
  REQUIRE(run("pretrain " + base + " --data " + (ws.root / "data").string() + " --out " +
                  (ws.root / "pre").string(),
              &log) == 0);
  REQUIRE(run("ablate-compression " + base + " --data " + (ws.root / "data").string() +
                  " --pretrained " + (ws.root / "pre" / "checkpoint.ckpt").string() +
                  " --rates 0 8 --out " + (ws.root / "ablate").string(),
              &log) == 0);

  const auto csv = hyperv2x::io::parse_csv(
      hyperv2x::io::read_file(ws.root / "ablate" / "compression.csv"));
  CHECK(csv.schema == "hyperv2x-compression-v1");
  CHECK(csv.header == std::vector<std::string>{"rate", "cv_bytes", "iou", "ece", "brier", "nll"});
  REQUIRE(csv.rows.size() == 2);
  CHECK(csv.num(0, "rate") == 0.0);
  CHECK(csv.num(1, "rate") == 8.0);
  CHECK(csv.num(1, "cv_bytes") * 8.0 == csv.num(0, "cv_bytes"));
  CHECK(fs::exists(ws.root / "ablate" / "rate_8" / "checkpoint.ckpt"));
}

TEST_CASE("cli failures exit nonzero with a single-line error and leave no outputs") {
  Workspace ws;
  const fs::path cfg_path = ws.root / "config.json";

  // unknown keys are rejected
  json bad = mini_config(ws.root);
  bad["scenario"]["typo_key"] = 1;
  write_config(bad, cfg_path);
  std::string log;
  CHECK(run("gen-data --config " + cfg_path.string() + " --out " + (ws.root / "x").string(),
            &log) == 1);
  CHECK(log.rfind("error: ", 0) == 0);
  CHECK(log.find("typo_key") != std::string::npos);
  CHECK_FALSE(fs::exists(ws.root / "x"));

  // invalid compression rate
  json bad_rate = mini_config(ws.root);
  bad_rate["compression"]["rate"] = 3;
  write_config(bad_rate, cfg_path);
  CHECK(run("gen-data --config " + cfg_path.string() + " --out " + (ws.root / "y").string(),
            &log) == 1);
  CHECK(log.rfind("error: ", 0) == 0);

  // missing dataset directory
  write_config(mini_config(ws.root), cfg_path);
  CHECK(run("pretrain --config " + cfg_path.string() + " --data " +
                (ws.root / "nodata").string() + " --out " + (ws.root / "z").string(),
            &log) == 1);
  CHECK(log.rfind("error: ", 0) == 0);
  CHECK_FALSE(fs::exists(ws.root / "z"));
}

TEST_CASE("cli honors the output-root environment override") {
  Workspace ws;
  const fs::path cfg_path = ws.root / "config.json";
  json cfg = mini_config(ws.root);
  cfg["output_dir"] = "rel_out";  // relative: the env root applies
  cfg["dataset"] = {{"train_scenes", 1}, {"test_scenes", 1}};
  write_config(cfg, cfg_path);
  const fs::path env_root = ws.root / "env_root";
  std::string log;
  const std::string cmd = "HYPERV2X_OUTPUT_ROOT=" + env_root.string() + " " + cli_path() +
                          " gen-data --config " + cfg_path.string() + " >/dev/null 2>&1";
  REQUIRE(std::system(cmd.c_str()) == 0);
  CHECK(fs::exists(env_root / "rel_out" / "train" / "manifest.json"));
}
