#include "hyperv2x/experiment.hpp"

#include <algorithm>
#include <set>

#include "hyperv2x/image.hpp"
#include "hyperv2x/io.hpp"
#include "hyperv2x/json_conv.hpp"
#include "hyperv2x/uncertainty.hpp"

namespace hyperv2x::xp {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

void check_keys(const json& j, const std::string& where, const std::set<std::string>& allowed) {
  if (!j.is_object()) throw std::invalid_argument("config: " + where + " must be an object");
  for (const auto& [key, value] : j.items()) {
    if (allowed.find(key) == allowed.end())
      throw std::invalid_argument("config: unknown key '" + where + key + "'");
  }
}

template <typename T>
void maybe(const json& j, const char* key, T& out) {
  if (j.contains(key)) j.at(key).get_to(out);
}

}  // namespace

ExperimentConfig ExperimentConfig::from_json(const json& j) {
  check_keys(j, "", {"scenario", "dataset", "features", "decoder", "hypernet", "compression",
                     "loss", "train", "eval", "fusion_mode", "output_dir"});
  ExperimentConfig c;
  if (j.contains("scenario")) {
    const auto& js = j.at("scenario");
    check_keys(js, "scenario.",
               {"region_size_m", "cell_size_m", "num_agents", "vehicle_count_range",
                "agent_fov_deg", "agent_range_m", "obs_noise_std", "num_classes_dynamic", "seed"});
    maybe(js, "region_size_m", c.scenario.region_size_m);
    maybe(js, "cell_size_m", c.scenario.cell_size_m);
    maybe(js, "num_agents", c.scenario.num_agents);
    if (js.contains("vehicle_count_range")) {
      c.scenario.vehicle_count_min = js.at("vehicle_count_range").at(0).get<std::int64_t>();
      c.scenario.vehicle_count_max = js.at("vehicle_count_range").at(1).get<std::int64_t>();
    }
    maybe(js, "agent_fov_deg", c.scenario.agent_fov_deg);
    maybe(js, "agent_range_m", c.scenario.agent_range_m);
    maybe(js, "obs_noise_std", c.scenario.obs_noise_std);
    maybe(js, "num_classes_dynamic", c.scenario.num_classes_dynamic);
    maybe(js, "seed", c.scenario.seed);
  }
  if (j.contains("dataset")) {
    const auto& jd = j.at("dataset");
    check_keys(jd, "dataset.", {"train_scenes", "test_scenes"});
    maybe(jd, "train_scenes", c.dataset.train_scenes);
    maybe(jd, "test_scenes", c.dataset.test_scenes);
  }
  if (j.contains("features")) {
    const auto& jf = j.at("features");
    check_keys(jf, "features.", {"channels", "enc_width1", "enc_width2"});
    maybe(jf, "channels", c.feature_channels);
    maybe(jf, "enc_width1", c.enc_width1);
    maybe(jf, "enc_width2", c.enc_width2);
  }
  if (j.contains("decoder")) {
    const auto& jd = j.at("decoder");
    check_keys(jd, "decoder.", {"hidden"});
    maybe(jd, "hidden", c.decoder_hidden);
  }
  if (j.contains("hypernet")) {
    const auto& jh = j.at("hypernet");
    check_keys(jh, "hypernet.", {"hidden", "logvar_bias"});
    maybe(jh, "hidden", c.hypernet.hidden);
    maybe(jh, "logvar_bias", c.hypernet.logvar_bias);
  }
  if (j.contains("compression")) {
    const auto& jc = j.at("compression");
    check_keys(jc, "compression.", {"rate"});
    maybe(jc, "rate", c.compression.rate);
  }
  if (j.contains("loss")) {
    const auto& jl = j.at("loss");
    check_keys(jl, "loss.", {"lambda_nll", "lambda_kl", "class_weights"});
    maybe(jl, "lambda_nll", c.loss.lambda_nll);
    maybe(jl, "lambda_kl", c.loss.lambda_kl);
    maybe(jl, "class_weights", c.loss.class_weights);
  }
  if (j.contains("train")) {
    const auto& jt = j.at("train");
    check_keys(jt, "train.",
               {"epochs_pretrain", "epochs_finetune", "batch_size", "lr", "k_samples", "seed",
                "freeze_encoder"});
    maybe(jt, "epochs_pretrain", c.train.epochs_pretrain);
    maybe(jt, "epochs_finetune", c.train.epochs_finetune);
    maybe(jt, "batch_size", c.train.batch_size);
    maybe(jt, "lr", c.train.lr);
    maybe(jt, "k_samples", c.train.k_samples);
    maybe(jt, "seed", c.train.seed);
    maybe(jt, "freeze_encoder", c.train.freeze_encoder);
  }
  if (j.contains("eval")) {
    const auto& je = j.at("eval");
    check_keys(je, "eval.",
               {"k_samples", "m_bins", "seed", "num_panels", "mc_dropout_rate", "mc_dropout_k",
                "fusion"});
    maybe(je, "k_samples", c.eval.k_samples);
    maybe(je, "m_bins", c.eval.m_bins);
    maybe(je, "seed", c.eval.seed);
    maybe(je, "num_panels", c.eval.num_panels);
    maybe(je, "mc_dropout_rate", c.eval.mc_dropout_rate);
    maybe(je, "mc_dropout_k", c.eval.mc_dropout_k);
    maybe(je, "fusion", c.eval.fusion);
  }
  maybe(j, "fusion_mode", c.fusion_mode);
  maybe(j, "output_dir", c.output_dir);

  if (c.loss.class_weights.empty()) {
    c.loss.class_weights.assign(static_cast<std::size_t>(c.scenario.num_classes_dynamic + 1), 2.0);
    c.loss.class_weights[0] = 1.0;
  }
  c.validate();
  return c;
}

ExperimentConfig ExperimentConfig::from_file(const fs::path& path) {
  json j;
  try {
    j = json::parse(io::read_file(path));
  } catch (const json::parse_error& e) {
    throw std::invalid_argument("config: cannot parse " + path.string() + ": " + e.what());
  }
  return from_json(j);
}

json ExperimentConfig::to_json() const {
  json j;
  j["scenario"] = scenario;
  j["dataset"] = {{"train_scenes", dataset.train_scenes}, {"test_scenes", dataset.test_scenes}};
  j["features"] = {{"channels", feature_channels},
                   {"enc_width1", enc_width1},
                   {"enc_width2", enc_width2}};
  j["decoder"] = {{"hidden", decoder_hidden}};
  j["hypernet"] = {{"hidden", hypernet.hidden}, {"logvar_bias", hypernet.logvar_bias}};
  j["compression"] = {{"rate", compression.rate}};
  j["loss"] = {{"lambda_nll", loss.lambda_nll},
               {"lambda_kl", loss.lambda_kl},
               {"class_weights", loss.class_weights}};
  j["train"] = {{"epochs_pretrain", train.epochs_pretrain},
                {"epochs_finetune", train.epochs_finetune},
                {"batch_size", train.batch_size},
                {"lr", train.lr},
                {"k_samples", train.k_samples},
                {"seed", train.seed},
                {"freeze_encoder", train.freeze_encoder}};
  j["eval"] = {{"k_samples", eval.k_samples},
               {"m_bins", eval.m_bins},
               {"seed", eval.seed},
               {"num_panels", eval.num_panels},
               {"mc_dropout_rate", eval.mc_dropout_rate},
               {"mc_dropout_k", eval.mc_dropout_k},
               {"fusion", eval.fusion}};
  j["fusion_mode"] = fusion_mode;
  j["output_dir"] = output_dir;
  return j;
}

fusion::FeatureSpec ExperimentConfig::feature_spec() const {
  fusion::FeatureSpec f;
  f.channels = feature_channels;
  f.grid_h = f.grid_w = scenario.grid_side();
  f.cell_size_m = scenario.cell_size_m;
  f.obs_channels = world::kObsChannels;
  f.enc_width1 = enc_width1;
  f.enc_width2 = enc_width2;
  return f;
}

dec::DecoderSpec ExperimentConfig::decoder_spec() const {
  dec::DecoderSpec d;
  d.in_channels = feature_channels;
  d.hidden = decoder_hidden;
  d.num_classes = scenario.num_classes_dynamic + 1;
  return d;
}

fusion::FusionMode ExperimentConfig::fusion_enum() const {
  if (fusion_mode == "max") return fusion::FusionMode::kMax;
  if (fusion_mode == "mean") return fusion::FusionMode::kMean;
  throw std::invalid_argument("config: fusion_mode must be max or mean");
}

void ExperimentConfig::validate() const {
  scenario.validate();
  feature_spec().validate();
  decoder_spec().validate();
  compression.validate(feature_channels);
  loss.validate(scenario.num_classes_dynamic + 1);
  train.validate();
  fusion_enum();
  if (dataset.train_scenes < 0 || dataset.test_scenes < 0)
    throw std::invalid_argument("config: dataset scene counts must be >= 0");
  if (eval.k_samples < 1 || eval.m_bins < 1 || eval.mc_dropout_k < 1)
    throw std::invalid_argument("config: eval counts must be >= 1");
  if (eval.mc_dropout_rate < 0 || eval.mc_dropout_rate >= 1)
    throw std::invalid_argument("config: eval.mc_dropout_rate must be in [0,1)");
  if (eval.fusion != "all" && eval.fusion != "ego_only" && eval.fusion != "map_fusion")
    throw std::invalid_argument("config: eval.fusion must be all|ego_only|map_fusion");
  if (hypernet.hidden < 1) throw std::invalid_argument("config: hypernet.hidden must be >= 1");
}

// ---------------------------------------------------------------------------
// protocol helpers

Model make_model(const ExperimentConfig& cfg, Variant variant) {
  Model m = Model::make(variant, cfg.feature_spec(), cfg.decoder_spec(), cfg.compression,
                        cfg.hypernet.hidden, cfg.hypernet.logvar_bias, cfg.train.seed);
  m.fusion_mode = cfg.fusion_enum();
  m.dropout_rate = cfg.eval.mc_dropout_rate;
  return m;
}

Model run_pretrain(const ExperimentConfig& cfg, const world::Dataset& train_ds,
                   train::TrainLog* log) {
  ExperimentConfig pretrain_cfg = cfg;
  pretrain_cfg.compression.rate = 0;  // the bottleneck is trained per rate later
  Model m = make_model(pretrain_cfg, Variant::kDeterministic);
  auto l = train::pretrain_single_agent(m, train_ds, cfg.train, cfg.loss);
  if (log != nullptr) *log = std::move(l);
  return m;
}

Model run_finetune(const ExperimentConfig& cfg, Variant variant, const world::Dataset& train_ds,
                   const Model& pretrained, train::TrainLog* log) {
  Model m = make_model(cfg, variant);
  m.warm_start_from(pretrained);
  auto l = train::finetune(m, train_ds, cfg.train, cfg.loss);
  if (log != nullptr) *log = std::move(l);
  return m;
}

// ---------------------------------------------------------------------------
// evaluation

namespace {

void write_panels(const fs::path& dir, std::int64_t index, const world::SceneRecord& rec,
                  const Tensor& mean_probs, const Tensor& ue, const Tensor& ua,
                  std::int64_t num_classes) {
  char prefix[32];
  std::snprintf(prefix, sizeof(prefix), "scene_%03lld_", static_cast<long long>(index));
  const std::string p(prefix);
  image::write_classmap_png(dir / (p + "gt.png"), rec.scene.gt_semantic,
                            static_cast<int>(num_classes));
  image::write_classmap_png(dir / (p + "pred.png"), metrics::argmax_classes(mean_probs),
                            static_cast<int>(num_classes));
  json sidecar;
  const auto [ue_lo, ue_hi] = image::write_scaled_png(dir / (p + "ue.png"), ue);
  sidecar["ue"] = {{"min", ue_lo}, {"max", ue_hi}};
  const auto [ua_lo, ua_hi] = image::write_scaled_png(dir / (p + "ua.png"), ua);
  sidecar["ua"] = {{"min", ua_lo}, {"max", ua_hi}};
  io::atomic_write(dir / (p + "scale.json"), sidecar.dump(2) + "\n");
}

}  // namespace

metrics::CalibrationReport evaluate_model(const Model& m, const world::Dataset& test_ds,
                                          const EvalCfg& eval, const fs::path* panel_dir) {
  if (test_ds.scenes.empty()) throw std::invalid_argument("evaluate_model: empty dataset");
  metrics::ReportAccumulator acc(eval.m_bins, m.dspec.num_classes);
  Rng seed_rng = Rng(eval.seed).split(0xe7a1ULL);

  for (std::size_t i = 0; i < test_ds.scenes.size(); ++i) {
    const auto& rec = test_ds.scenes[i];
    const std::uint64_t scene_seed = seed_rng.next_u64();
    Tensor mean_probs, ue, ua;
    std::vector<std::uint8_t> fg_override;
    bool has_override = false;

    if (eval.fusion == "map_fusion") {
      auto late = baselines::map_fusion_forward(m, rec);
      mean_probs = std::move(late.mean_probs);
      fg_override = std::move(late.fg_mask);
      has_override = true;
      dec::StochasticPrediction single;
      single.probs = Tensor::wrap({1, m.dspec.num_classes, mean_probs.dim(1), mean_probs.dim(2)},
                                  mean_probs.v);
      ue = uq::epistemic(single);
      ua = uq::aleatoric(mean_probs);
    } else {
      const bool ego_only = eval.fusion == "ego_only";
      const std::int64_t k = m.variant == Variant::kDeterministic ? 1
                             : m.variant == Variant::kMcDropout   ? eval.mc_dropout_k
                                                                  : eval.k_samples;
      const auto out = predict_scene(m, rec, k, scene_seed, ego_only);
      const auto maps = uq::analyze(out.pred);
      mean_probs = maps.mean_probs;
      ue = maps.epistemic;
      ua = maps.aleatoric;
    }

    if (has_override) {
      acc.add_scene_with_mask(mean_probs, rec.scene.gt_semantic, ue, ua, fg_override);
    } else {
      acc.add_scene(mean_probs, rec.scene.gt_semantic, ue, ua);
    }
    if (panel_dir != nullptr && static_cast<std::int64_t>(i) < eval.num_panels)
      write_panels(*panel_dir, static_cast<std::int64_t>(i), rec, mean_probs, ue, ua,
                   m.dspec.num_classes);
  }

  auto report = acc.finish();
  report.model = variant_name(m.variant) + (eval.fusion == "all" ? "" : "+" + eval.fusion);
  report.compression_rate = m.comp_cfg.rate;
  report.cv_bytes = fusion::communicated_bytes(m.fspec, m.comp_cfg);
  return report;
}

json report_to_json(const metrics::CalibrationReport& r) {
  json j;
  j["schema_version"] = "hyperv2x-report-v1";
  j["model"] = r.model;
  j["compression_rate"] = r.compression_rate;
  j["cv_bytes"] = r.cv_bytes;
  j["vehicle_iou"] = r.vehicle_iou;
  j["ece"] = r.ece;
  j["brier"] = r.brier;
  j["nll"] = r.nll;
  j["m_bins"] = r.m_bins;
  j["num_classes"] = r.num_classes;
  j["class_mapping"] = "0=background, 1..C_d=dynamic (vehicle size classes)";
  j["num_scenes"] = r.num_scenes;
  j["num_pixels"] = r.num_pixels;
  j["ue_mean"] = r.ue_mean;
  j["ue_max"] = r.ue_max;
  j["ua_mean"] = r.ua_mean;
  j["ua_max"] = r.ua_max;
  json bins = json::array();
  for (const auto& b : r.bins)
    bins.push_back(
        {{"lo", b.lo}, {"hi", b.hi}, {"count", b.count}, {"acc", b.acc}, {"conf", b.conf}});
  j["bins"] = bins;
  return j;
}

void write_eval_csv(const fs::path& path, const std::vector<metrics::CalibrationReport>& rows) {
  io::CsvWriter csv("hyperv2x-eval-v1",
                    {"model", "rate", "cv_bytes", "iou", "ece", "brier", "nll"});
  for (const auto& r : rows) {
    csv.add_row({r.model, io::CsvWriter::fmt(static_cast<std::int64_t>(r.compression_rate)),
                 io::CsvWriter::fmt(r.cv_bytes), io::CsvWriter::fmt(r.vehicle_iou),
                 io::CsvWriter::fmt(r.ece), io::CsvWriter::fmt(r.brier),
                 io::CsvWriter::fmt(r.nll)});
  }
  csv.write(path);
}

void write_compression_csv(const fs::path& path,
                           const std::vector<metrics::CalibrationReport>& rows) {
  io::CsvWriter csv("hyperv2x-compression-v1", {"rate", "cv_bytes", "iou", "ece", "brier", "nll"});
  for (const auto& r : rows) {
    csv.add_row({io::CsvWriter::fmt(static_cast<std::int64_t>(r.compression_rate)),
                 io::CsvWriter::fmt(r.cv_bytes), io::CsvWriter::fmt(r.vehicle_iou),
                 io::CsvWriter::fmt(r.ece), io::CsvWriter::fmt(r.brier),
                 io::CsvWriter::fmt(r.nll)});
  }
  csv.write(path);
}

}  // namespace hyperv2x::xp
