#pragma once

#include "hyperv2x/decoder.hpp"
#include "hyperv2x/model.hpp"

namespace hyperv2x::baselines {

struct DropoutConfig {
  double rate = 0.1;
  std::int64_t k = 20;

  void validate() const;
};

/// Point prediction of the conventional decoder: one decode, one softmax.
Tensor deterministic_forward(const Tensor& g, const Tensor& theta_dec,
                             const dec::DecoderSpec& spec);

/// Test-time MC dropout: K decodes with independent per-channel unit masks on
/// the decoder's hidden activations, survivors scaled by 1/(1-rate).
dec::StochasticPrediction mc_dropout_forward(const Tensor& g, const Tensor& theta_dec,
                                             const dec::DecoderSpec& spec,
                                             const DropoutConfig& cfg, std::uint64_t seed);

/// Late-fusion reference: per-agent point predictions, foreground masks OR-ed
/// in the ego frame. The probability map is the per-agent average.
struct MapFusionResult {
  Tensor mean_probs;
  std::vector<std::uint8_t> fg_mask;
};
MapFusionResult map_fusion_forward(const Model& m, const world::SceneRecord& rec);

}  // namespace hyperv2x::baselines
