#include "hyperv2x/uncertainty.hpp"

#include <cmath>
#include <stdexcept>

namespace hyperv2x::uq {

Tensor mean_prediction(const dec::StochasticPrediction& pred) {
  const std::int64_t k = pred.probs.dim(0), c = pred.probs.dim(1);
  const std::int64_t h = pred.probs.dim(2), w = pred.probs.dim(3);
  if (k < 1) throw std::invalid_argument("mean_prediction: need K >= 1");
  Tensor mean({c, h, w});
  const std::int64_t plane = c * h * w;
  for (std::int64_t s = 0; s < k; ++s)
    for (std::int64_t i = 0; i < plane; ++i) mean[i] += pred.probs[s * plane + i];
  const double inv = 1.0 / static_cast<double>(k);
  for (auto& x : mean.v) x *= inv;
  return mean;
}

Tensor epistemic(const dec::StochasticPrediction& pred, bool population) {
  const std::int64_t k = pred.probs.dim(0), c = pred.probs.dim(1);
  const std::int64_t h = pred.probs.dim(2), w = pred.probs.dim(3);
  Tensor u({h, w});
  if (k == 1) return u;  // single sample: no spread to measure
  const std::int64_t plane = c * h * w, hw = h * w;
  const double denom = population ? static_cast<double>(k) : static_cast<double>(k - 1);
  for (std::int64_t ch = 0; ch < c; ++ch) {
    for (std::int64_t px = 0; px < hw; ++px) {
      // shifted two-pass: deviations are taken against the first sample, so
      // bit-identical samples yield exactly zero variance
      const double shift = pred.probs[ch * hw + px];
      double d_sum = 0.0, d2_sum = 0.0;
      for (std::int64_t s = 0; s < k; ++s) {
        const double d = pred.probs[s * plane + ch * hw + px] - shift;
        d_sum += d;
        d2_sum += d * d;
      }
      const double kd = static_cast<double>(k);
      const double var = std::max(0.0, (d2_sum - d_sum * d_sum / kd) / denom);
      u[px] += var;
    }
  }
  const double invc = 1.0 / static_cast<double>(c);
  for (auto& x : u.v) x *= invc;
  return u;
}

Tensor aleatoric(const Tensor& mean_probs) {
  if (mean_probs.rank() != 3) throw std::invalid_argument("aleatoric: expected [C,H,W]");
  const std::int64_t c = mean_probs.dim(0), h = mean_probs.dim(1), w = mean_probs.dim(2);
  const std::int64_t hw = h * w;
  Tensor u({h, w});
  for (std::int64_t px = 0; px < hw; ++px) {
    double sum = 0.0, ent = 0.0;
    for (std::int64_t ch = 0; ch < c; ++ch) {
      const double p = mean_probs[ch * hw + px];
      if (p < -1e-4) throw std::invalid_argument("aleatoric: negative probability");
      sum += p;
      if (p > 0.0) ent -= p * std::log(p);
    }
    if (std::fabs(sum - 1.0) > 1e-4)
      throw std::invalid_argument("aleatoric: probabilities off the simplex (sum " +
                                  std::to_string(sum) + ")");
    u[px] = ent;
  }
  return u;
}

Tensor aleatoric_normalized(const Tensor& mean_probs) {
  Tensor u = aleatoric(mean_probs);
  const double scale = 1.0 / std::log(static_cast<double>(mean_probs.dim(0)));
  for (auto& x : u.v) x *= scale;
  return u;
}

UncertaintyMaps analyze(const dec::StochasticPrediction& pred) {
  UncertaintyMaps maps;
  maps.mean_probs = mean_prediction(pred);
  maps.epistemic = epistemic(pred);
  maps.aleatoric = aleatoric(maps.mean_probs);
  return maps;
}

}  // namespace hyperv2x::uq
