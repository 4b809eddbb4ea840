#include "hyperv2x/baselines.hpp"

#include <stdexcept>

#include "hyperv2x/metrics.hpp"

namespace hyperv2x::baselines {

void DropoutConfig::validate() const {
  if (rate < 0.0 || rate >= 1.0) throw std::invalid_argument("DropoutConfig: rate must be in [0,1)");
  if (k < 1) throw std::invalid_argument("DropoutConfig: k must be >= 1");
}

Tensor deterministic_forward(const Tensor& g, const Tensor& theta_dec,
                             const dec::DecoderSpec& spec) {
  return ad::kernels::softmax_channel(dec::decode(g, theta_dec, spec));
}

dec::StochasticPrediction mc_dropout_forward(const Tensor& g, const Tensor& theta_dec,
                                             const dec::DecoderSpec& spec,
                                             const DropoutConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  dec::StochasticPrediction pred;
  pred.probs = Tensor({cfg.k, spec.num_classes, g.dim(1), g.dim(2)});
  const std::int64_t plane = spec.num_classes * g.dim(1) * g.dim(2);
  Rng rng(seed);
  for (std::int64_t i = 0; i < cfg.k; ++i) {
    const Tensor probs = ad::kernels::softmax_channel(
        dec::decode_dropout(g, theta_dec, spec, cfg.rate, rng));
    std::copy(probs.v.begin(), probs.v.end(), pred.probs.v.begin() + i * plane);
  }
  return pred;
}

MapFusionResult map_fusion_forward(const Model& m, const world::SceneRecord& rec) {
  if (rec.observations.empty())
    throw std::invalid_argument("map_fusion_forward: scene record has no observations");
  MapFusionResult out;
  const auto v = rec.observations.size();
  for (std::size_t a = 0; a < v; ++a) {
    // single-agent pass through the shared encoder/decoder
    world::SceneRecord solo;
    solo.scene = rec.scene;
    solo.observations.push_back(rec.observations[a]);
    const Tensor g = fused_features(m, solo, /*ego_only=*/true);
    const Tensor probs = deterministic_forward(g, m.det_theta, m.dspec);
    const auto fg = metrics::argmax_foreground(probs);
    if (a == 0) {
      out.mean_probs = probs;
      out.fg_mask = fg;
    } else {
      for (std::int64_t i = 0; i < probs.numel(); ++i) out.mean_probs[i] += probs[i];
      for (std::size_t i = 0; i < fg.size(); ++i)
        out.fg_mask[i] = out.fg_mask[i] || fg[i] ? 1 : 0;
    }
  }
  const double inv = 1.0 / static_cast<double>(v);
  for (auto& x : out.mean_probs.v) x *= inv;
  return out;
}

}  // namespace hyperv2x::baselines
