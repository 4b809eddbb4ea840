// Operator front end: dataset generation, the two-stage training schedule,
// evaluation with uncertainty-map export, and the compression/uncertainty
// comparison tables. Every command validates its config, stages outputs in a
// temp directory and renames it into place on success, and is reproducible
// from the frozen config alone.

#include <CLI11.hpp>

#include <cstdlib>
#include <iostream>

#include "hyperv2x/experiment.hpp"
#include "hyperv2x/io.hpp"
#include "hyperv2x/json_conv.hpp"
#include "hyperv2x/version.hpp"

namespace fs = std::filesystem;
using namespace hyperv2x;

namespace {

fs::path resolve_out(const std::string& config_dir, const std::string& cli_out) {
  fs::path out = cli_out.empty() ? fs::path(config_dir) : fs::path(cli_out);
  if (const char* root = std::getenv("HYPERV2X_OUTPUT_ROOT"); root != nullptr && out.is_relative())
    out = fs::path(root) / out;
  return out;
}

/// Staged output directory: work happens in `<final>.tmp`, which replaces
/// `<final>` atomically-enough on commit. A failed command leaves no final
/// directory behind.
class OutputStage {
 public:
  explicit OutputStage(fs::path final_dir) : final_(std::move(final_dir)), dir_(final_) {
    dir_ += ".tmp";
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  ~OutputStage() {
    if (!committed_) fs::remove_all(dir_);
  }
  const fs::path& dir() const { return dir_; }
  void commit() {
    fs::remove_all(final_);
    if (final_.has_parent_path()) fs::create_directories(final_.parent_path());
    fs::rename(dir_, final_);
    committed_ = true;
  }

 private:
  fs::path final_, dir_;
  bool committed_ = false;
};

void freeze_config(const xp::ExperimentConfig& cfg, const fs::path& dir) {
  io::atomic_write(dir / "config.json", cfg.to_json().dump(2) + "\n");
  io::atomic_write(dir / "version.txt", std::string(kVersion) + "\n");
}

world::Dataset load_split(const xp::ExperimentConfig& cfg, const fs::path& data_dir,
                          const char* split) {
  const world::Dataset ds = world::load_dataset(data_dir / split);
  const nlohmann::json a = ds.config, b = cfg.scenario;
  if (a != b)
    throw std::runtime_error("dataset at " + (data_dir / split).string() +
                             " was generated with a different scenario config");
  return ds;
}

std::string train_rng_echo(const xp::ExperimentConfig& cfg) {
  return Rng(cfg.train.seed).serialize();
}

int cmd_gen_data(const xp::ExperimentConfig& cfg, const fs::path& out, int workers) {
  OutputStage stage(out);
  const std::uint64_t train_base = Rng(cfg.scenario.seed).split(1).next_u64();
  const std::uint64_t test_base = Rng(cfg.scenario.seed).split(2).next_u64();
  world::save_dataset(
      world::build_dataset(cfg.scenario, train_base, cfg.dataset.train_scenes, workers),
      stage.dir() / "train");
  world::save_dataset(
      world::build_dataset(cfg.scenario, test_base, cfg.dataset.test_scenes, workers),
      stage.dir() / "test");
  freeze_config(cfg, stage.dir());
  stage.commit();
  std::cout << "dataset written to " << out.string() << "\n";
  return 0;
}

int cmd_pretrain(const xp::ExperimentConfig& cfg, const fs::path& data, const fs::path& out) {
  const auto train_ds = load_split(cfg, data, "train");
  OutputStage stage(out);
  train::TrainLog log;
  const Model m = xp::run_pretrain(cfg, train_ds, &log);
  ckpt::save(stage.dir() / "checkpoint.ckpt", m, cfg.to_json().dump(), train_rng_echo(cfg));
  io::atomic_write(stage.dir() / "curve.csv", log.curve_csv());
  freeze_config(cfg, stage.dir());
  stage.commit();
  if (log.aborted) {
    std::cout << "pretraining aborted on non-finite loss; last good checkpoint kept\n";
    return 0;
  }
  std::cout << "pretrained checkpoint written to " << (out / "checkpoint.ckpt").string() << "\n";
  return 0;
}

int cmd_train(const xp::ExperimentConfig& cfg, const fs::path& data, const fs::path& pretrained,
              const std::string& variant, const fs::path& out) {
  const auto train_ds = load_split(cfg, data, "train");
  const auto base = ckpt::load(pretrained);
  OutputStage stage(out);
  train::TrainLog log;
  const Model m = xp::run_finetune(cfg, variant_from_name(variant), train_ds, base.model, &log);
  ckpt::save(stage.dir() / "checkpoint.ckpt", m, cfg.to_json().dump(), train_rng_echo(cfg));
  io::atomic_write(stage.dir() / "curve.csv", log.curve_csv());
  freeze_config(cfg, stage.dir());
  stage.commit();
  std::cout << "trained " << variant << " checkpoint written to "
            << (out / "checkpoint.ckpt").string() << "\n";
  return 0;
}

int cmd_eval(xp::ExperimentConfig cfg, const fs::path& data, const fs::path& checkpoint,
             const std::string& fusion_override, const fs::path& out) {
  if (!fusion_override.empty()) cfg.eval.fusion = fusion_override;
  cfg.validate();
  const auto test_ds = load_split(cfg, data, "test");
  const auto loaded = ckpt::load(checkpoint);
  OutputStage stage(out);
  const fs::path panels = stage.dir() / "panels";
  fs::create_directories(panels);
  const auto report = xp::evaluate_model(loaded.model, test_ds, cfg.eval, &panels);
  io::atomic_write(stage.dir() / "report.json", xp::report_to_json(report).dump(2) + "\n");
  xp::write_eval_csv(stage.dir() / "eval.csv", {report});
  freeze_config(cfg, stage.dir());
  stage.commit();
  std::cout << "eval report written to " << (out / "report.json").string() << "\n";
  return 0;
}

int cmd_ablate_compression(const xp::ExperimentConfig& cfg, const fs::path& data,
                           const fs::path& pretrained, const std::vector<int>& rates,
                           const fs::path& out) {
  const auto train_ds = load_split(cfg, data, "train");
  const auto test_ds = load_split(cfg, data, "test");
  const auto base = ckpt::load(pretrained);
  OutputStage stage(out);
  std::vector<metrics::CalibrationReport> rows;
  for (int rate : rates) {
    xp::ExperimentConfig rate_cfg = cfg;
    rate_cfg.compression.rate = rate;
    rate_cfg.validate();
    train::TrainLog log;
    const Model m = xp::run_finetune(rate_cfg, Variant::kHyper, train_ds, base.model, &log);
    const fs::path rate_dir = stage.dir() / ("rate_" + std::to_string(rate));
    fs::create_directories(rate_dir);
    ckpt::save(rate_dir / "checkpoint.ckpt", m, rate_cfg.to_json().dump(), train_rng_echo(cfg));
    io::atomic_write(rate_dir / "curve.csv", log.curve_csv());
    auto report = xp::evaluate_model(m, test_ds, rate_cfg.eval);
    io::atomic_write(rate_dir / "report.json", xp::report_to_json(report).dump(2) + "\n");
    rows.push_back(std::move(report));
  }
  xp::write_compression_csv(stage.dir() / "compression.csv", rows);
  freeze_config(cfg, stage.dir());
  stage.commit();
  std::cout << "compression ablation written to " << (out / "compression.csv").string() << "\n";
  return 0;
}

int cmd_compare(const xp::ExperimentConfig& cfg, const fs::path& data,
                const std::vector<double>& dropout_rates, const fs::path& out) {
  const auto train_ds = load_split(cfg, data, "train");
  const auto test_ds = load_split(cfg, data, "test");
  OutputStage stage(out);

  const Model pre = xp::run_pretrain(cfg, train_ds);
  const Model hyper_m = xp::run_finetune(cfg, Variant::kHyper, train_ds, pre);
  const Model noise_m = xp::run_finetune(cfg, Variant::kNoise, train_ds, pre);
  const Model det_m = xp::run_finetune(cfg, Variant::kDeterministic, train_ds, pre);

  const auto hyper_report = xp::evaluate_model(hyper_m, test_ds, cfg.eval);
  const auto noise_report = xp::evaluate_model(noise_m, test_ds, cfg.eval);

  std::vector<metrics::CalibrationReport> table3;
  for (double rate : dropout_rates) {
    Model mc = det_m;
    mc.variant = Variant::kMcDropout;
    mc.dropout_rate = rate;
    xp::EvalCfg e = cfg.eval;
    e.mc_dropout_rate = rate;
    auto report = xp::evaluate_model(mc, test_ds, e);
    char label[48];
    std::snprintf(label, sizeof(label), "mcdropout(%.2g)", rate);
    report.model = label;
    table3.push_back(std::move(report));
  }
  table3.push_back(hyper_report);
  xp::write_eval_csv(stage.dir() / "table3.csv", table3);
  xp::write_eval_csv(stage.dir() / "table4.csv", {noise_report, hyper_report});
  freeze_config(cfg, stage.dir());
  stage.commit();
  std::cout << "comparison tables written to " << out.string() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hyper-V2X: Bayesian-hypernetwork uncertainty estimation for cooperative "
               "BEV segmentation on a synthetic world"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  std::string config_path, out_dir, data_dir, pretrained_path, checkpoint_path;
  std::string variant = "hyper", fusion_override;
  std::vector<int> rates = {0, 2, 8, 32};
  std::vector<double> dropout_rates = {0.1, 0.3, 0.5, 0.7};
  int workers = 1;

  auto add_config = [&](CLI::App* cmd) {
    cmd->add_option("--config", config_path, "experiment config JSON")->required();
    cmd->add_option("--out", out_dir, "output directory (default: config output_dir)");
  };

  auto* gen = app.add_subcommand("gen-data", "generate the synthetic dataset splits");
  add_config(gen);
  gen->add_option("--workers", workers, "parallel scene generation workers")
      ->check(CLI::Range(1, 64));

  auto* pre = app.add_subcommand("pretrain", "single-agent deterministic pretraining");
  add_config(pre);
  pre->add_option("--data", data_dir, "dataset directory (from gen-data)")->required();

  auto* tr = app.add_subcommand("train", "fine-tune from a pretrained checkpoint");
  add_config(tr);
  tr->add_option("--data", data_dir)->required();
  tr->add_option("--pretrained", pretrained_path, "pretrained checkpoint")->required();
  tr->add_option("--variant", variant, "hyper | noise | mcdropout | deterministic");

  auto* ev = app.add_subcommand("eval", "evaluate a checkpoint on the test split");
  add_config(ev);
  ev->add_option("--data", data_dir)->required();
  ev->add_option("--checkpoint", checkpoint_path)->required();
  ev->add_option("--fusion", fusion_override, "all | ego_only | map_fusion");

  auto* ab = app.add_subcommand("ablate-compression", "per-rate fine-tune and evaluate");
  add_config(ab);
  ab->add_option("--data", data_dir)->required();
  ab->add_option("--pretrained", pretrained_path)->required();
  ab->add_option("--rates", rates, "compression rates");

  auto* cp = app.add_subcommand("compare", "hyper vs mc-dropout vs noise-conditioned tables");
  add_config(cp);
  cp->add_option("--data", data_dir)->required();
  cp->add_option("--dropout-rates", dropout_rates, "MC-dropout rates for the table");

  CLI11_PARSE(app, argc, argv);

  try {
    const auto cfg = xp::ExperimentConfig::from_file(config_path);
    const fs::path out = resolve_out(cfg.output_dir, out_dir);
    if (gen->parsed()) return cmd_gen_data(cfg, out, workers);
    if (pre->parsed()) return cmd_pretrain(cfg, data_dir, out);
    if (tr->parsed()) return cmd_train(cfg, data_dir, pretrained_path, variant, out);
    if (ev->parsed()) return cmd_eval(cfg, data_dir, checkpoint_path, fusion_override, out);
    if (ab->parsed()) return cmd_ablate_compression(cfg, data_dir, pretrained_path, rates, out);
    if (cp->parsed()) return cmd_compare(cfg, data_dir, dropout_rates, out);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  std::cerr << "error: no subcommand\n";
  return 1;
}
