#pragma once

#include "hyperv2x/decoder.hpp"
#include "hyperv2x/tensor.hpp"

namespace hyperv2x::uq {

struct UncertaintyMaps {
  Tensor epistemic;   // [H,W], >= 0
  Tensor aleatoric;   // [H,W], in [0, ln C]
  Tensor mean_probs;  // [C,H,W], simplex per pixel
};

/// Mean predictive distribution across the K samples; stays on the simplex.
Tensor mean_prediction(const dec::StochasticPrediction& pred);

/// Per-pixel class-probability variance averaged over classes (population
/// variance, divide by K, so a single sample yields exactly zero). Pass
/// `population = false` for the sample-variance (K-1) alternative.
Tensor epistemic(const dec::StochasticPrediction& pred, bool population = true);

/// Entropy of a mean probability map, natural log, 0·log 0 := 0. Rejects rows
/// further than 1e-4 off the simplex.
Tensor aleatoric(const Tensor& mean_probs);

/// Normalized variant U_A / ln C for cross-class-count comparisons.
Tensor aleatoric_normalized(const Tensor& mean_probs);

UncertaintyMaps analyze(const dec::StochasticPrediction& pred);

}  // namespace hyperv2x::uq
