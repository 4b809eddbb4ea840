#pragma once

#include <json.hpp>

#include <filesystem>
#include <optional>
#include <string>

#include "hyperv2x/baselines.hpp"
#include "hyperv2x/checkpoint.hpp"
#include "hyperv2x/dataset.hpp"
#include "hyperv2x/metrics.hpp"
#include "hyperv2x/training.hpp"

namespace hyperv2x::xp {

struct DatasetCfg {
  std::int64_t train_scenes = 200;
  std::int64_t test_scenes = 40;
};

struct HypernetCfg {
  std::int64_t hidden = 256;
  double logvar_bias = -6.0;
};

struct EvalCfg {
  std::int64_t k_samples = 10;  // stochastic passes for hypernetwork variants
  std::int64_t m_bins = 15;
  std::uint64_t seed = 1234;
  std::int64_t num_panels = 2;
  double mc_dropout_rate = 0.1;
  std::int64_t mc_dropout_k = 20;
  std::string fusion = "all";  // all | ego_only | map_fusion
};

/// The single experiment config file: every run validates it strictly
/// (unknown keys rejected) and writes the resolved copy next to its outputs.
struct ExperimentConfig {
  world::ScenarioConfig scenario;
  DatasetCfg dataset;
  std::int64_t feature_channels = 32;
  std::int64_t enc_width1 = 16, enc_width2 = 32;
  std::int64_t decoder_hidden = 16;
  HypernetCfg hypernet;
  fusion::CompressionConfig compression;
  train::LossWeights loss;
  train::TrainConfig train;
  EvalCfg eval;
  std::string fusion_mode = "max";  // max | mean
  std::string output_dir = "runs/out";

  static ExperimentConfig from_json(const nlohmann::json& j);
  static ExperimentConfig from_file(const std::filesystem::path& path);
  nlohmann::json to_json() const;

  fusion::FeatureSpec feature_spec() const;
  dec::DecoderSpec decoder_spec() const;
  fusion::FusionMode fusion_enum() const;
  void validate() const;
};

// ---------------------------------------------------------------------------
// protocol helpers shared by the CLI and the acceptance suite

Model make_model(const ExperimentConfig& cfg, Variant variant);

Model run_pretrain(const ExperimentConfig& cfg, const world::Dataset& train_ds,
                   train::TrainLog* log = nullptr);

Model run_finetune(const ExperimentConfig& cfg, Variant variant, const world::Dataset& train_ds,
                   const Model& pretrained, train::TrainLog* log = nullptr);

// ---------------------------------------------------------------------------
// evaluation

metrics::CalibrationReport evaluate_model(const Model& m, const world::Dataset& test_ds,
                                          const EvalCfg& eval,
                                          const std::filesystem::path* panel_dir = nullptr);

nlohmann::json report_to_json(const metrics::CalibrationReport& r);

/// eval.csv row in Table-2 column order, prefixed by the model name.
void write_eval_csv(const std::filesystem::path& path,
                    const std::vector<metrics::CalibrationReport>& rows);
/// compression.csv: pure Table-2 schema (rate, CV, IoU, ECE, BS, NLL).
void write_compression_csv(const std::filesystem::path& path,
                           const std::vector<metrics::CalibrationReport>& rows);

}  // namespace hyperv2x::xp
