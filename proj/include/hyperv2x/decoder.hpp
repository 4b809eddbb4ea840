#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "hyperv2x/autodiff.hpp"
#include "hyperv2x/hypernet.hpp"
#include "hyperv2x/rng.hpp"
#include "hyperv2x/tensor.hpp"

namespace hyperv2x::dec {

/// Segmentation head: conv3x3 (C -> hidden), tanh, conv3x3 (hidden -> hidden),
/// tanh, conv1x1 (hidden -> classes). The decoder never owns parameters; every
/// forward pass injects a flat weight vector sliced by the manifest.
struct DecoderSpec {
  std::int64_t in_channels = 32;
  std::int64_t hidden = 16;
  std::int64_t num_classes = 3;  // C_d + 1, background first

  void validate() const;
  std::uint64_t hash() const;
};

struct ManifestEntry {
  std::string name;
  std::vector<std::int64_t> shape;
  std::int64_t offset = 0;
  std::int64_t length = 0;
};

/// Ordered flat layout of every decoder parameter. Slices are contiguous,
/// non-overlapping and tile [0, P) exactly.
struct WeightManifest {
  std::vector<ManifestEntry> entries;
  std::int64_t param_count = 0;

  static WeightManifest for_spec(const DecoderSpec& spec);
  std::uint64_t hash() const;
  const ManifestEntry& entry(const std::string& name) const;
};

std::int64_t param_count(const DecoderSpec& spec);

/// Flattens per-layer tensors into [P] per the manifest, and back.
Tensor flatten_weights(const std::vector<Tensor>& layer_tensors, const WeightManifest& m);
std::vector<Tensor> unflatten_weights(const Tensor& theta, const WeightManifest& m);

/// Xavier-style init of a flat decoder weight vector.
Tensor init_weights(const DecoderSpec& spec, Rng& rng);

Tensor decode(const Tensor& g, const Tensor& theta, const DecoderSpec& spec);  // logits

/// K per-pixel probability maps from K weight samples.
struct StochasticPrediction {
  Tensor probs;  // [K, classes, H, W]

  std::int64_t k() const { return probs.dim(0); }
  std::int64_t classes() const { return probs.dim(1); }
};

StochasticPrediction forward_k(const Tensor& g, const std::vector<hyper::WeightSample>& samples,
                               const DecoderSpec& spec);

/// Test-time MC-dropout decode: per-channel Bernoulli masks on both hidden
/// activation maps, survivors scaled by 1/(1-rate).
Tensor decode_dropout(const Tensor& g, const Tensor& theta, const DecoderSpec& spec, double rate,
                      Rng& rng);

ad::Ptr decode_graph(const ad::Ptr& g, const ad::Ptr& theta, const DecoderSpec& spec);
/// Graph decode with fixed dropout masks (one [hidden] mask per hidden layer).
ad::Ptr decode_graph_dropout(const ad::Ptr& g, const ad::Ptr& theta, const DecoderSpec& spec,
                             const Tensor& mask1, const Tensor& mask2, double keep_scale);

}  // namespace hyperv2x::dec
