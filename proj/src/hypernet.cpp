#include "hyperv2x/hypernet.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace hyperv2x::hyper {

using MapConstMat =
    Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
using MapConstVec = Eigen::Map<const Eigen::VectorXd>;
using MapVec = Eigen::Map<Eigen::VectorXd>;

void HypernetSpec::validate() const {
  if (in_dim < 1 || hidden < 1 || param_count < 1)
    throw std::invalid_argument("HypernetSpec: dimensions must be >= 1");
}

HypernetParams HypernetParams::init(const HypernetSpec& spec, Rng& rng, double logvar_bias) {
  spec.validate();
  HypernetParams p;
  auto dense = [&rng](std::int64_t o, std::int64_t i, double gain) {
    Tensor w({o, i});
    const double s = gain * std::sqrt(2.0 / static_cast<double>(i + o));
    for (auto& x : w.v) x = rng.normal(0.0, s);
    return w;
  };
  p.w1 = dense(spec.hidden, spec.in_dim, 1.0);
  p.b1 = Tensor::zeros({spec.hidden});
  p.w2 = dense(spec.hidden, spec.hidden, 1.0);
  p.b2 = Tensor::zeros({spec.hidden});
  // Output heads start small: the mu head bias is warm-started by the
  // training module, and a near-deterministic posterior needs the log-var
  // head to sit at its bias.
  p.w_mu = dense(spec.param_count, spec.hidden, 0.05);
  p.b_mu = Tensor::zeros({spec.param_count});
  p.w_lv = dense(spec.param_count, spec.hidden, 0.05);
  p.b_lv = Tensor::full({spec.param_count}, logvar_bias);
  return p;
}

Tensor context_embed(const Tensor& g) {
  if (g.rank() != 3) throw std::invalid_argument("context_embed: expected [C,H,W]");
  const std::int64_t c = g.dim(0), hw = g.dim(1) * g.dim(2);
  if (hw == 0) throw std::invalid_argument("context_embed: zero-sized spatial grid");
  Tensor z({c});
  for (std::int64_t ch = 0; ch < c; ++ch) {
    double s = 0.0;
    for (std::int64_t i = 0; i < hw; ++i) s += g[ch * hw + i];
    z[ch] = s / static_cast<double>(hw);
  }
  return z;
}

namespace {

Tensor dense_fwd(const Tensor& w, const Tensor& x, const Tensor& b) {
  const std::int64_t o = w.dim(0), i = w.dim(1);
  Tensor y({o});
  MapConstMat W(w.v.data(), o, i);
  MapConstVec X(x.v.data(), i);
  MapVec Y(y.v.data(), o);
  Y.noalias() = W * X;
  for (std::int64_t k = 0; k < o; ++k) y[k] += b[k];
  return y;
}

}  // namespace

WeightPosterior posterior(const Tensor& conditioning, const HypernetParams& p,
                          const HypernetSpec& spec) {
  spec.validate();
  if (conditioning.rank() != 1 || conditioning.dim(0) != spec.in_dim)
    throw std::invalid_argument("posterior: conditioning vector length " +
                                shape_str(conditioning.shape) + " does not match hypernet input " +
                                std::to_string(spec.in_dim));
  Tensor h1 = dense_fwd(p.w1, conditioning, p.b1);
  for (auto& x : h1.v) x = std::tanh(x);
  Tensor h2 = dense_fwd(p.w2, h1, p.b2);
  for (auto& x : h2.v) x = std::tanh(x);
  WeightPosterior post;
  post.mu = dense_fwd(p.w_mu, h2, p.b_mu);
  post.log_var = dense_fwd(p.w_lv, h2, p.b_lv);
  for (auto& x : post.log_var.v) x = std::clamp(x, kLogVarLo, kLogVarHi);
  return post;
}

std::vector<WeightSample> sample_weights(const WeightPosterior& post, std::int64_t k_samples,
                                         std::uint64_t seed) {
  if (k_samples < 1) throw std::invalid_argument("sample_weights: k_samples must be >= 1");
  const std::int64_t p = post.mu.numel();
  if (post.log_var.numel() != p)
    throw std::invalid_argument("sample_weights: mu/log_var length mismatch");
  std::vector<WeightSample> out;
  out.reserve(static_cast<std::size_t>(k_samples));
  Rng rng(seed);
  for (std::int64_t k = 0; k < k_samples; ++k) {
    // each sample draws from its own split stream so samples can be
    // reproduced independently of K
    Rng stream = rng.split(static_cast<std::uint64_t>(k));
    WeightSample s;
    s.sample_index = k + 1;
    s.theta = Tensor({p});
    for (std::int64_t i = 0; i < p; ++i)
      s.theta[i] = post.mu[i] + std::exp(0.5 * post.log_var[i]) * stream.normal();
    out.push_back(std::move(s));
  }
  return out;
}

Tensor noise_condition(std::int64_t dim, double std, std::uint64_t seed) {
  if (dim < 1) throw std::invalid_argument("noise_condition: dim must be >= 1");
  if (std < 0) throw std::invalid_argument("noise_condition: std must be >= 0");
  Tensor z({dim});
  Rng rng(seed);
  for (auto& x : z.v) x = std * rng.normal();
  return z;
}

// ---------------------------------------------------------------------------
// graph builders

HypernetNodes hypernet_leaves(const HypernetParams& p) {
  return {ad::leaf(p.w1),   ad::leaf(p.b1),   ad::leaf(p.w2),   ad::leaf(p.b2),
          ad::leaf(p.w_mu), ad::leaf(p.b_mu), ad::leaf(p.w_lv), ad::leaf(p.b_lv)};
}

PosteriorNodes posterior_graph(const ad::Ptr& conditioning, const HypernetNodes& h) {
  auto h1 = ad::tanh_op(ad::affine(h.w1, conditioning, h.b1));
  auto h2 = ad::tanh_op(ad::affine(h.w2, h1, h.b2));
  PosteriorNodes post;
  post.mu = ad::affine(h.w_mu, h2, h.b_mu);
  post.log_var = ad::clamp_op(ad::affine(h.w_lv, h2, h.b_lv), kLogVarLo, kLogVarHi);
  return post;
}

ad::Ptr reparam_sample_graph(const PosteriorNodes& post, const Tensor& eps) {
  auto sigma = ad::exp_op(ad::scale(post.log_var, 0.5));
  return ad::add(post.mu, ad::mul(sigma, ad::constant(eps)));
}

}  // namespace hyperv2x::hyper
