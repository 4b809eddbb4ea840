#pragma once

#include <map>
#include <string>
#include <vector>

#include "hyperv2x/metrics.hpp"
#include "hyperv2x/model.hpp"

namespace hyperv2x::train {

struct LossWeights {
  double lambda_nll = 0.1;
  double lambda_kl = 1e-3;
  std::vector<double> class_weights;  // length = C_d + 1

  void validate(std::int64_t num_classes) const;
};

struct TrainConfig {
  std::int64_t epochs_pretrain = 30;
  std::int64_t epochs_finetune = 12;
  std::int64_t batch_size = 1;
  double lr = 2e-3;
  std::int64_t k_samples = 4;  // sampled decoders per step
  std::uint64_t seed = 1;
  bool freeze_encoder = false;

  void validate() const;
};

// -- loss terms (raw; the graph versions live in model.cpp builders) ----------

double seg_loss(const Tensor& logits, const GridI& labels, const std::vector<double>& class_weights);
double nll_loss(const Tensor& mean_probs, const GridI& labels);
/// Closed-form KL(N(mu, diag sigma^2) || N(0,I)); per-parameter mean by
/// default so lambda_kl stays scale-stable across decoder sizes.
double kl_gaussian(const hyper::WeightPosterior& post, bool per_param_mean = true);
double total_loss(double seg, double nll, double kl, const LossWeights& w);

// -- optimizer -----------------------------------------------------------------

class Adam {
 public:
  explicit Adam(double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);
  void step(const std::vector<NamedTensor>& params,
            const std::map<std::string, Tensor>& grads);

 private:
  double lr_, beta1_, beta2_, eps_;
  std::int64_t t_ = 0;
  std::map<std::string, std::pair<Tensor, Tensor>> moments_;
};

// -- schedules -----------------------------------------------------------------

struct EpochStats {
  double seg = 0.0, nll = 0.0, kl = 0.0, total = 0.0;
};

struct TrainLog {
  std::vector<EpochStats> epochs;
  bool aborted = false;  // non-finite loss hit; model holds last good state

  std::string curve_csv() const;
};

/// Stage 1: ego-only observations, conventional decoder, segmentation loss
/// only. On divergence the model is restored to the last epoch-end snapshot.
TrainLog pretrain_single_agent(Model& m, const world::Dataset& ds, const TrainConfig& cfg,
                               const LossWeights& lw);

/// Stage 2: optimizes the full objective with K sampled decoders per step for
/// the hypernetwork variants, or the conventional path for
/// deterministic/mcdropout models. Dispatches on m.variant.
TrainLog finetune(Model& m, const world::Dataset& ds, const TrainConfig& cfg,
                  const LossWeights& lw);

// -- gradient verification -------------------------------------------------------

struct GradCheckGroup {
  std::string name;
  double max_rel_err = 0.0;
  std::int64_t checked = 0;
};

struct GradCheckReport {
  std::vector<GradCheckGroup> groups;
  double max_rel_err = 0.0;

  bool ok(double tol) const { return max_rel_err <= tol; }
  std::vector<std::string> failing(double tol) const;
};

/// Compares analytic gradients of total_loss against central finite
/// differences with frozen noise draws. `max_per_group` = 0 checks every
/// coordinate; otherwise a deterministic stride subsample.
GradCheckReport grad_check(Model& m, const world::SceneRecord& rec, const LossWeights& lw,
                           std::int64_t k_samples, std::uint64_t eps_seed, double fd_step,
                           std::int64_t max_per_group = 0);

}  // namespace hyperv2x::train
