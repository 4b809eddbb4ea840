#pragma once

#include <map>
#include <string>
#include <vector>

#include "hyperv2x/dataset.hpp"
#include "hyperv2x/decoder.hpp"
#include "hyperv2x/fusion.hpp"
#include "hyperv2x/hypernet.hpp"

namespace hyperv2x {

enum class Variant { kDeterministic, kHyper, kNoise, kMcDropout };

std::string variant_name(Variant v);
Variant variant_from_name(const std::string& name);

/// Full cooperative model state. The hypernetwork block is populated for the
/// kHyper/kNoise variants; the flat deterministic decoder weight vector backs
/// the kDeterministic/kMcDropout variants.
struct Model {
  fusion::FeatureSpec fspec;
  dec::DecoderSpec dspec;
  fusion::CompressionConfig comp_cfg;
  fusion::FusionMode fusion_mode = fusion::FusionMode::kMax;

  fusion::EncoderParams enc;
  fusion::CompressionParams comp;
  hyper::HypernetParams hnet;
  Tensor det_theta;

  Variant variant = Variant::kDeterministic;
  std::int64_t hyper_hidden = 256;
  double noise_cond_std = 0.1;   // Table-4 ablation: N(0, 0.01)
  double dropout_rate = 0.1;     // kMcDropout

  hyper::HypernetSpec hspec() const;
  dec::WeightManifest manifest() const;

  static Model make(Variant variant, const fusion::FeatureSpec& fspec,
                    const dec::DecoderSpec& dspec, const fusion::CompressionConfig& comp_cfg,
                    std::int64_t hyper_hidden, double logvar_bias, std::uint64_t seed);

  /// Copies encoder weights and warm-starts the decoder path from a
  /// pretrained deterministic model: det_theta directly, and for hypernetwork
  /// variants the mu-head bias, so initial samples reproduce the pretrained
  /// decoder.
  void warm_start_from(const Model& pretrained);
};

struct NamedTensor {
  std::string name;
  Tensor* tensor;
};

std::vector<NamedTensor> trainable_params(Model& m, bool freeze_encoder);
std::vector<NamedTensor> all_params(Model& m);

// ---------------------------------------------------------------------------
// forward passes

/// Encode -> compress -> warp-to-ego -> fuse -> refine for one scene.
/// `ego_only` restricts the input to agent 0's observation.
Tensor fused_features(const Model& m, const world::SceneRecord& rec, bool ego_only);

struct ScenePrediction {
  dec::StochasticPrediction pred;
  hyper::WeightPosterior post;  // populated for hypernetwork variants
};

/// Raw (no-graph) prediction used by evaluation; k is the number of
/// stochastic passes (forced to 1 for the deterministic variant).
ScenePrediction predict_scene(const Model& m, const world::SceneRecord& rec, std::int64_t k,
                              std::uint64_t seed, bool ego_only);

// ---------------------------------------------------------------------------
// training graphs

struct LossGraph {
  ad::Ptr total, seg, nll, kl;
  std::map<std::string, ad::Ptr> leaves;  // parameter name -> leaf node
  ad::Ptr fused;                          // refined fused feature node
};

struct StochasticLossOptions {
  std::vector<Tensor> eps;        // K fixed reparameterization draws, each [P]
  const Tensor* conditioning = nullptr;  // non-null: fixed conditioning (noise variant)
  bool freeze_encoder = false;
};

/// ELBO-style loss over K sampled decoders (Hyper-V2X / noise ablation).
LossGraph build_stochastic_loss(const Model& m, const world::SceneRecord& rec,
                                const std::vector<double>& class_weights, double lambda_nll,
                                double lambda_kl, const StochasticLossOptions& opt);

struct DeterministicLossOptions {
  bool ego_only = false;
  bool freeze_encoder = false;
  const Tensor* dropout_mask1 = nullptr;  // [hidden], kMcDropout training
  const Tensor* dropout_mask2 = nullptr;
  double keep_scale = 1.0;
};

/// Weighted cross-entropy loss of the conventional decoder path.
LossGraph build_deterministic_loss(const Model& m, const world::SceneRecord& rec,
                                   const std::vector<double>& class_weights,
                                   const DeterministicLossOptions& opt);

}  // namespace hyperv2x
