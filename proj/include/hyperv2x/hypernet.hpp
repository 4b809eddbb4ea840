#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "hyperv2x/autodiff.hpp"
#include "hyperv2x/rng.hpp"
#include "hyperv2x/tensor.hpp"

namespace hyperv2x::hyper {

/// log-variance head outputs are clamped to this range, so sigma stays in
/// [e^-6, e^2] and the KL/NLL terms remain finite for any finite input.
inline constexpr double kLogVarLo = -12.0;
inline constexpr double kLogVarHi = 4.0;

struct HypernetSpec {
  std::int64_t in_dim = 32;       // conditioning width (= fused channels)
  std::int64_t hidden = 256;
  std::int64_t param_count = 0;   // P, from the decoder manifest

  void validate() const;
};

/// MLP mapping a conditioning vector to a Gaussian posterior over the flat
/// decoder weight vector: two tanh hidden layers, then separate linear mu and
/// log-variance heads (a 2P output split in two).
struct HypernetParams {
  Tensor w1, b1, w2, b2;
  Tensor w_mu, b_mu;
  Tensor w_lv, b_lv;

  static HypernetParams init(const HypernetSpec& spec, Rng& rng, double logvar_bias = -6.0);
};

struct WeightPosterior {
  Tensor mu;       // [P]
  Tensor log_var;  // [P], clamped
};

struct WeightSample {
  Tensor theta;  // [P]
  std::int64_t sample_index = 0;  // 1-based
};

/// Per-channel global spatial mean of a fused [C,H,W] feature map.
Tensor context_embed(const Tensor& g);

WeightPosterior posterior(const Tensor& conditioning, const HypernetParams& p,
                          const HypernetSpec& spec);

/// Reparameterized draws theta = mu + sigma ⊙ eps, deterministic in seed.
std::vector<WeightSample> sample_weights(const WeightPosterior& post, std::int64_t k_samples,
                                         std::uint64_t seed);

/// Zero-mean Gaussian conditioning vector (the Table-4 ablation input).
Tensor noise_condition(std::int64_t dim, double std, std::uint64_t seed);

// -- graph builders -----------------------------------------------------------

struct HypernetNodes {
  ad::Ptr w1, b1, w2, b2, w_mu, b_mu, w_lv, b_lv;
};
HypernetNodes hypernet_leaves(const HypernetParams& p);

struct PosteriorNodes {
  ad::Ptr mu, log_var;
};
PosteriorNodes posterior_graph(const ad::Ptr& conditioning, const HypernetNodes& h);

/// theta_k = mu + exp(0.5 log_var) ⊙ eps_k with eps fixed; the gradient path
/// reaches (mu, log_var) but never eps.
ad::Ptr reparam_sample_graph(const PosteriorNodes& post, const Tensor& eps);

}  // namespace hyperv2x::hyper
