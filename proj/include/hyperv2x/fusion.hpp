#pragma once

#include <cstdint>
#include <vector>

#include "hyperv2x/autodiff.hpp"
#include "hyperv2x/geometry.hpp"
#include "hyperv2x/rng.hpp"
#include "hyperv2x/tensor.hpp"

namespace hyperv2x::fusion {

/// Shape contract of the fused feature pipeline.
struct FeatureSpec {
  std::int64_t channels = 32;  // C of the fused map
  std::int64_t grid_h = 64, grid_w = 64;
  double cell_size_m = 0.5;
  std::int64_t obs_channels = 3;
  std::int64_t enc_width1 = 16, enc_width2 = 32;

  void validate() const;
};

/// Trainable encoder parameters: the per-agent extractor (three 3x3 convs,
/// tanh between them, linear last) plus one post-fusion 3x3 refinement conv.
struct EncoderParams {
  Tensor w1, b1, w2, b2, w3, b3;  // per-agent stack
  Tensor wr, br;                  // post-fusion refinement

  static EncoderParams init(const FeatureSpec& spec, Rng& rng);
};

enum class FusionMode { kMax, kMean };

struct CompressionConfig {
  int rate = 0;  // 0 = off; otherwise channels/rate bottleneck

  void validate(std::int64_t channels) const;
  static const std::vector<int>& allowed_rates();
};

/// 1x1 down/up projections around the transmitted bottleneck.
struct CompressionParams {
  Tensor w_down, b_down, w_up, b_up;

  static CompressionParams init(std::int64_t channels, int rate, Rng& rng);
  bool empty() const { return w_down.v.empty(); }
};

// -- spec operations (raw evaluation path) ------------------------------------

Tensor encode_agent(const Tensor& obs, const EncoderParams& p, const FeatureSpec& spec);

/// Inverse bilinear warp of a feature map from a source frame into the ego
/// frame; out-of-grid samples are zero-filled.
Tensor warp_to_ego(const Tensor& feat, const Se2& src_to_ego, double cell_size);

Tensor fuse(const std::vector<Tensor>& ego_frame_feats, FusionMode mode = FusionMode::kMax);

struct CompressResult {
  Tensor features;
  std::int64_t communicated_bytes = 0;
};
/// rate 0 passes features through and reports the full float32 volume;
/// otherwise features pass the trainable bottleneck and the volume is
/// measured there.
CompressResult compress(const Tensor& feat, const CompressionConfig& cfg,
                        const CompressionParams* params);

std::int64_t communicated_bytes(const FeatureSpec& spec, const CompressionConfig& cfg);

Tensor refine(const Tensor& fused, const EncoderParams& p);

// -- graph builders (training path; forward semantics identical to the above) -

struct EncoderNodes {
  ad::Ptr w1, b1, w2, b2, w3, b3, wr, br;
};
struct CompressionNodes {
  ad::Ptr w_down, b_down, w_up, b_up;
};

EncoderNodes encoder_leaves(const EncoderParams& p);
CompressionNodes compression_leaves(const CompressionParams& p);

ad::Ptr encode_agent_graph(const ad::Ptr& obs, const EncoderNodes& e);
ad::Ptr compress_graph(const ad::Ptr& feat, const CompressionConfig& cfg,
                       const CompressionNodes* c);
ad::Ptr fuse_graph(const std::vector<ad::Ptr>& feats, FusionMode mode);
ad::Ptr refine_graph(const ad::Ptr& fused, const EncoderNodes& e);

}  // namespace hyperv2x::fusion
