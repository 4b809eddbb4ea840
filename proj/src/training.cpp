#include "hyperv2x/training.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "hyperv2x/io.hpp"

namespace hyperv2x::train {

void LossWeights::validate(std::int64_t num_classes) const {
  if (lambda_nll < 0 || lambda_kl < 0)
    throw std::invalid_argument("LossWeights: lambdas must be >= 0");
  if (static_cast<std::int64_t>(class_weights.size()) != num_classes)
    throw std::invalid_argument("LossWeights: class weight count (" +
                                std::to_string(class_weights.size()) + ") != classes (" +
                                std::to_string(num_classes) + ")");
  for (double w : class_weights)
    if (w < 0) throw std::invalid_argument("LossWeights: class weights must be >= 0");
}

void TrainConfig::validate() const {
  if (epochs_pretrain < 0 || epochs_finetune < 0)
    throw std::invalid_argument("TrainConfig: epoch counts must be >= 0");
  if (batch_size < 1) throw std::invalid_argument("TrainConfig: batch_size must be >= 1");
  if (k_samples < 1) throw std::invalid_argument("TrainConfig: k_samples must be >= 1");
  if (lr <= 0) throw std::invalid_argument("TrainConfig: lr must be > 0");
}

double seg_loss(const Tensor& logits, const GridI& labels,
                const std::vector<double>& class_weights) {
  const std::int64_t c = logits.dim(0), h = logits.dim(1), w = logits.dim(2);
  if (labels.h != h || labels.w != w) throw std::invalid_argument("seg_loss: shape mismatch");
  if (static_cast<std::int64_t>(class_weights.size()) != c)
    throw std::invalid_argument("seg_loss: class weight count mismatch");
  const Tensor probs = ad::kernels::softmax_channel(logits);
  const std::int64_t hw = h * w;
  double loss = 0.0;
  for (std::int64_t px = 0; px < hw; ++px) {
    const auto y = labels.v[static_cast<std::size_t>(px)];
    if (y < 0 || y >= c) throw std::invalid_argument("seg_loss: label out of range");
    loss -= class_weights[static_cast<std::size_t>(y)] *
            std::log(std::max(probs[y * hw + px], 1e-300));
  }
  return loss / static_cast<double>(hw);
}

double nll_loss(const Tensor& mean_probs, const GridI& labels) {
  return metrics::nll(mean_probs, labels);
}

double kl_gaussian(const hyper::WeightPosterior& post, bool per_param_mean) {
  const std::int64_t p = post.mu.numel();
  if (post.log_var.numel() != p)
    throw std::invalid_argument("kl_gaussian: mu/log_var length mismatch");
  double kl = 0.0;
  for (std::int64_t i = 0; i < p; ++i) {
    const double mu = post.mu[i], lv = post.log_var[i];
    kl += mu * mu + std::exp(lv) - 1.0 - lv;
  }
  kl *= 0.5;
  return per_param_mean ? kl / static_cast<double>(p) : kl;
}

double total_loss(double seg, double nll, double kl, const LossWeights& w) {
  if (!std::isfinite(seg) || !std::isfinite(nll) || !std::isfinite(kl))
    throw std::invalid_argument("total_loss: non-finite term");
  return seg + w.lambda_nll * nll + w.lambda_kl * kl;
}

// ---------------------------------------------------------------------------
// Adam

Adam::Adam(double lr, double beta1, double beta2, double eps)
    : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

void Adam::step(const std::vector<NamedTensor>& params,
                const std::map<std::string, Tensor>& grads) {
  ++t_;
  const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (const auto& [name, tensor] : params) {
    const auto it = grads.find(name);
    if (it == grads.end()) continue;
    const Tensor& g = it->second;
    auto& [m, v] = moments_[name];
    if (m.v.empty()) {
      m = Tensor::zeros(tensor->shape);
      v = Tensor::zeros(tensor->shape);
    }
    for (std::int64_t i = 0; i < tensor->numel(); ++i) {
      const double gi = g[i];
      m[i] = beta1_ * m[i] + (1.0 - beta1_) * gi;
      v[i] = beta2_ * v[i] + (1.0 - beta2_) * gi * gi;
      (*tensor)[i] -= lr_ * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + eps_);
    }
  }
}

// ---------------------------------------------------------------------------
// schedules

namespace {

std::map<std::string, Tensor> collect_grads(const std::map<std::string, ad::Ptr>& leaves) {
  std::map<std::string, Tensor> grads;
  for (const auto& [name, node] : leaves) {
    if (!node->grad.v.empty()) grads.emplace(name, node->grad);
  }
  return grads;
}

void accumulate_grads(std::map<std::string, Tensor>& into,
                      const std::map<std::string, ad::Ptr>& leaves) {
  for (const auto& [name, node] : leaves) {
    if (node->grad.v.empty()) continue;
    auto [it, inserted] = into.emplace(name, node->grad);
    if (!inserted)
      for (std::int64_t i = 0; i < it->second.numel(); ++i) it->second[i] += node->grad[i];
  }
}

void scale_grads(std::map<std::string, Tensor>& grads, double s) {
  for (auto& [name, g] : grads)
    for (auto& x : g.v) x *= s;
}

std::vector<Tensor> snapshot(Model& m) {
  std::vector<Tensor> out;
  for (const auto& p : all_params(m)) out.push_back(*p.tensor);
  return out;
}

void restore(Model& m, const std::vector<Tensor>& snap) {
  auto params = all_params(m);
  for (std::size_t i = 0; i < params.size(); ++i) *params[i].tensor = snap[i];
}

struct StepOutcome {
  EpochStats stats;
  bool finite = true;
};

}  // namespace

std::string TrainLog::curve_csv() const {
  io::CsvWriter csv("hyperv2x-curve-v1", {"epoch", "seg", "nll", "kl", "total"});
  for (std::size_t e = 0; e < epochs.size(); ++e) {
    const auto& s = epochs[e];
    csv.add_row({io::CsvWriter::fmt(static_cast<std::int64_t>(e)), io::CsvWriter::fmt(s.seg),
                 io::CsvWriter::fmt(s.nll), io::CsvWriter::fmt(s.kl), io::CsvWriter::fmt(s.total)});
  }
  return csv.str();
}

namespace {

/// Shared minibatch loop. `make_loss` builds the per-scene loss graph.
template <typename MakeLoss>
TrainLog run_epochs(Model& m, const world::Dataset& ds, const TrainConfig& cfg,
                    std::int64_t epochs, MakeLoss&& make_loss) {
  cfg.validate();
  if (ds.scenes.empty()) throw std::invalid_argument("training: empty dataset");
  TrainLog log;
  Adam opt(cfg.lr);
  Rng shuffle_rng = Rng(cfg.seed).split(0x5381ULL);
  auto params = trainable_params(m, cfg.freeze_encoder);

  std::vector<std::size_t> order(ds.scenes.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  for (std::int64_t epoch = 0; epoch < epochs; ++epoch) {
    auto snap = snapshot(m);
    // Fisher-Yates with the dedicated stream keeps epoch order reproducible
    for (std::size_t i = order.size(); i > 1; --i)
      std::swap(order[i - 1],
                order[static_cast<std::size_t>(shuffle_rng.uniform_int(0, static_cast<std::int64_t>(i) - 1))]);

    EpochStats acc;
    bool finite = true;
    std::size_t pos = 0;
    std::int64_t steps = 0;
    while (pos < order.size() && finite) {
      const std::size_t batch_end =
          std::min(order.size(), pos + static_cast<std::size_t>(cfg.batch_size));
      std::map<std::string, Tensor> grads;
      double batch_sum = 0.0;
      std::size_t batch_n = 0;
      for (; pos < batch_end; ++pos) {
        LossGraph lg = make_loss(ds.scenes[order[pos]], epoch, pos);
        ad::backward(lg.total);
        accumulate_grads(grads, lg.leaves);
        acc.seg += lg.seg->val[0];
        acc.nll += lg.nll->val[0];
        acc.kl += lg.kl->val[0];
        acc.total += lg.total->val[0];
        batch_sum += lg.total->val[0];
        ++batch_n;
      }
      if (!std::isfinite(batch_sum)) {
        finite = false;
        break;
      }
      scale_grads(grads, 1.0 / static_cast<double>(batch_n));
      opt.step(params, grads);
      ++steps;
    }
    if (!finite) {
      restore(m, snap);
      log.aborted = true;
      break;
    }
    const double inv = 1.0 / static_cast<double>(ds.scenes.size());
    acc.seg *= inv;
    acc.nll *= inv;
    acc.kl *= inv;
    acc.total *= inv;
    log.epochs.push_back(acc);
  }
  return log;
}

}  // namespace

TrainLog pretrain_single_agent(Model& m, const world::Dataset& ds, const TrainConfig& cfg,
                               const LossWeights& lw) {
  lw.validate(m.dspec.num_classes);
  return run_epochs(m, ds, cfg, cfg.epochs_pretrain,
                    [&](const world::SceneRecord& rec, std::int64_t, std::size_t) {
                      DeterministicLossOptions opt;
                      opt.ego_only = true;
                      opt.freeze_encoder = cfg.freeze_encoder;
                      return build_deterministic_loss(m, rec, lw.class_weights, opt);
                    });
}

TrainLog finetune(Model& m, const world::Dataset& ds, const TrainConfig& cfg,
                  const LossWeights& lw) {
  lw.validate(m.dspec.num_classes);
  const std::int64_t p = dec::param_count(m.dspec);
  Rng step_rng = Rng(cfg.seed).split(0xf17eULL);

  switch (m.variant) {
    case Variant::kHyper:
    case Variant::kNoise:
      return run_epochs(
          m, ds, cfg, cfg.epochs_finetune,
          [&, p](const world::SceneRecord& rec, std::int64_t, std::size_t) {
            StochasticLossOptions opt;
            opt.freeze_encoder = cfg.freeze_encoder;
            opt.eps.reserve(static_cast<std::size_t>(cfg.k_samples));
            for (std::int64_t k = 0; k < cfg.k_samples; ++k) {
              Tensor e({p});
              for (auto& x : e.v) x = step_rng.normal();
              opt.eps.push_back(std::move(e));
            }
            Tensor cond;
            if (m.variant == Variant::kNoise) {
              cond = hyper::noise_condition(m.fspec.channels, m.noise_cond_std,
                                            step_rng.next_u64());
              opt.conditioning = &cond;
            }
            return build_stochastic_loss(m, rec, lw.class_weights, lw.lambda_nll, lw.lambda_kl,
                                         opt);
          });
    case Variant::kDeterministic:
      return run_epochs(m, ds, cfg, cfg.epochs_finetune,
                        [&](const world::SceneRecord& rec, std::int64_t, std::size_t) {
                          DeterministicLossOptions opt;
                          opt.freeze_encoder = cfg.freeze_encoder;
                          return build_deterministic_loss(m, rec, lw.class_weights, opt);
                        });
    case Variant::kMcDropout:
      return run_epochs(
          m, ds, cfg, cfg.epochs_finetune,
          [&](const world::SceneRecord& rec, std::int64_t, std::size_t) {
            DeterministicLossOptions opt;
            opt.freeze_encoder = cfg.freeze_encoder;
            Tensor m1({m.dspec.hidden});
            Tensor m2({m.dspec.hidden});
            for (auto& x : m1.v) x = step_rng.uniform() < m.dropout_rate ? 0.0 : 1.0;
            for (auto& x : m2.v) x = step_rng.uniform() < m.dropout_rate ? 0.0 : 1.0;
            opt.dropout_mask1 = &m1;
            opt.dropout_mask2 = &m2;
            opt.keep_scale = 1.0 / (1.0 - m.dropout_rate);
            return build_deterministic_loss(m, rec, lw.class_weights, opt);
          });
  }
  throw std::logic_error("finetune: unknown variant");
}

// ---------------------------------------------------------------------------
// gradient verification

GradCheckReport grad_check(Model& m, const world::SceneRecord& rec, const LossWeights& lw,
                           std::int64_t k_samples, std::uint64_t eps_seed, double fd_step,
                           std::int64_t max_per_group) {
  lw.validate(m.dspec.num_classes);
  const std::int64_t p = dec::param_count(m.dspec);

  // frozen randomness: same eps and conditioning for every evaluation
  std::vector<Tensor> eps;
  Rng eps_rng(eps_seed);
  for (std::int64_t k = 0; k < k_samples; ++k) {
    Tensor e({p});
    for (auto& x : e.v) x = eps_rng.normal();
    eps.push_back(std::move(e));
  }
  Tensor noise_cond;
  const bool stochastic = m.variant == Variant::kHyper || m.variant == Variant::kNoise;
  if (m.variant == Variant::kNoise)
    noise_cond = hyper::noise_condition(m.fspec.channels, m.noise_cond_std, eps_rng.next_u64());

  auto build = [&]() {
    if (stochastic) {
      StochasticLossOptions opt;
      opt.eps = eps;
      if (m.variant == Variant::kNoise) opt.conditioning = &noise_cond;
      return build_stochastic_loss(m, rec, lw.class_weights, lw.lambda_nll, lw.lambda_kl, opt);
    }
    DeterministicLossOptions opt;
    return build_deterministic_loss(m, rec, lw.class_weights, opt);
  };

  LossGraph lg = build();
  ad::backward(lg.total);
  const auto analytic = collect_grads(lg.leaves);

  GradCheckReport report;
  for (const auto& named : trainable_params(m, false)) {
    GradCheckGroup group;
    group.name = named.name;
    const auto it = analytic.find(named.name);
    const std::int64_t n = named.tensor->numel();
    const std::int64_t stride =
        max_per_group > 0 ? std::max<std::int64_t>(1, n / max_per_group) : 1;
    for (std::int64_t i = 0; i < n; i += stride) {
      const double orig = (*named.tensor)[i];
      (*named.tensor)[i] = orig + fd_step;
      const double up = build().total->val[0];
      (*named.tensor)[i] = orig - fd_step;
      const double down = build().total->val[0];
      (*named.tensor)[i] = orig;
      const double fd = (up - down) / (2.0 * fd_step);
      const double an = it == analytic.end() ? 0.0 : it->second[i];
      const double scale = std::max({std::fabs(fd), std::fabs(an), 1e-6});
      group.max_rel_err = std::max(group.max_rel_err, std::fabs(fd - an) / scale);
      ++group.checked;
    }
    report.max_rel_err = std::max(report.max_rel_err, group.max_rel_err);
    report.groups.push_back(std::move(group));
  }
  return report;
}

std::vector<std::string> GradCheckReport::failing(double tol) const {
  std::vector<std::string> out;
  for (const auto& g : groups)
    if (g.max_rel_err > tol) out.push_back(g.name);
  return out;
}

}  // namespace hyperv2x::train
