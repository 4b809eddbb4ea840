#include "hyperv2x/fusion.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace hyperv2x::fusion {

void FeatureSpec::validate() const {
  if (channels < 1 || grid_h < 1 || grid_w < 1 || obs_channels < 1 || enc_width1 < 1 ||
      enc_width2 < 1)
    throw std::invalid_argument("FeatureSpec: all dimensions must be >= 1");
  if (cell_size_m <= 0) throw std::invalid_argument("FeatureSpec: cell_size_m must be > 0");
}

namespace {

Tensor conv_init(std::int64_t out_c, std::int64_t in_c, std::int64_t k, Rng& rng) {
  Tensor w({out_c, in_c, k, k});
  const double s = std::sqrt(2.0 / static_cast<double>(in_c * k * k + out_c));
  for (auto& x : w.v) x = rng.normal(0.0, s);
  return w;
}

}  // namespace

EncoderParams EncoderParams::init(const FeatureSpec& spec, Rng& rng) {
  spec.validate();
  EncoderParams p;
  p.w1 = conv_init(spec.enc_width1, spec.obs_channels, 3, rng);
  p.b1 = Tensor::zeros({spec.enc_width1});
  p.w2 = conv_init(spec.enc_width2, spec.enc_width1, 3, rng);
  p.b2 = Tensor::zeros({spec.enc_width2});
  p.w3 = conv_init(spec.channels, spec.enc_width2, 3, rng);
  p.b3 = Tensor::zeros({spec.channels});
  p.wr = conv_init(spec.channels, spec.channels, 3, rng);
  p.br = Tensor::zeros({spec.channels});
  return p;
}

const std::vector<int>& CompressionConfig::allowed_rates() {
  static const std::vector<int> rates = {0, 2, 4, 8, 32, 64};
  return rates;
}

void CompressionConfig::validate(std::int64_t channels) const {
  const auto& allowed = allowed_rates();
  if (std::find(allowed.begin(), allowed.end(), rate) == allowed.end())
    throw std::invalid_argument("CompressionConfig: rate must be one of {0,2,4,8,32,64}");
  if (rate > 0 && channels % rate != 0)
    throw std::invalid_argument("CompressionConfig: channels must be divisible by rate");
}

CompressionParams CompressionParams::init(std::int64_t channels, int rate, Rng& rng) {
  CompressionParams p;
  if (rate == 0) return p;
  const std::int64_t mid = channels / rate;
  p.w_down = conv_init(mid, channels, 1, rng);
  p.b_down = Tensor::zeros({mid});
  p.w_up = conv_init(channels, mid, 1, rng);
  p.b_up = Tensor::zeros({channels});
  return p;
}

Tensor encode_agent(const Tensor& obs, const EncoderParams& p, const FeatureSpec& spec) {
  if (obs.rank() != 3 || obs.dim(0) != spec.obs_channels || obs.dim(1) != spec.grid_h ||
      obs.dim(2) != spec.grid_w)
    throw std::invalid_argument("encode_agent: observation shape " + shape_str(obs.shape) +
                                " does not match FeatureSpec");
  Tensor h1 = ad::kernels::conv2d_same(obs, p.w1, p.b1);
  for (auto& x : h1.v) x = std::tanh(x);
  Tensor h2 = ad::kernels::conv2d_same(h1, p.w2, p.b2);
  for (auto& x : h2.v) x = std::tanh(x);
  return ad::kernels::conv2d_same(h2, p.w3, p.b3);
}

Tensor warp_to_ego(const Tensor& feat, const Se2& src_to_ego, double cell_size) {
  return ad::kernels::bilinear_warp(feat, src_to_ego, cell_size);
}

Tensor fuse(const std::vector<Tensor>& feats, FusionMode mode) {
  if (feats.empty()) throw std::invalid_argument("fuse: empty feature list");
  for (const auto& f : feats)
    if (!f.same_shape(feats[0])) throw std::invalid_argument("fuse: feature shape mismatch");
  Tensor out = feats[0];
  if (mode == FusionMode::kMax) {
    for (std::size_t k = 1; k < feats.size(); ++k)
      for (std::int64_t i = 0; i < out.numel(); ++i) out[i] = std::max(out[i], feats[k][i]);
  } else {
    for (std::size_t k = 1; k < feats.size(); ++k)
      for (std::int64_t i = 0; i < out.numel(); ++i) out[i] += feats[k][i];
    const double inv = 1.0 / static_cast<double>(feats.size());
    for (auto& x : out.v) x *= inv;
  }
  return out;
}

CompressResult compress(const Tensor& feat, const CompressionConfig& cfg,
                        const CompressionParams* params) {
  cfg.validate(feat.dim(0));
  CompressResult res;
  if (cfg.rate == 0) {
    res.features = feat;
    res.communicated_bytes = feat.numel() * 4;
    return res;
  }
  if (params == nullptr || params->empty())
    throw std::invalid_argument("compress: rate > 0 requires bottleneck parameters");
  Tensor mid = ad::kernels::conv2d_same(feat, params->w_down, params->b_down);
  res.communicated_bytes = mid.numel() * 4;
  res.features = ad::kernels::conv2d_same(mid, params->w_up, params->b_up);
  return res;
}

std::int64_t communicated_bytes(const FeatureSpec& spec, const CompressionConfig& cfg) {
  cfg.validate(spec.channels);
  const std::int64_t c = cfg.rate == 0 ? spec.channels : spec.channels / cfg.rate;
  return c * spec.grid_h * spec.grid_w * 4;
}

Tensor refine(const Tensor& fused, const EncoderParams& p) {
  Tensor g = ad::kernels::conv2d_same(fused, p.wr, p.br);
  for (auto& x : g.v) x = std::tanh(x);
  return g;
}

// ---------------------------------------------------------------------------
// graph builders

EncoderNodes encoder_leaves(const EncoderParams& p) {
  return {ad::leaf(p.w1), ad::leaf(p.b1), ad::leaf(p.w2), ad::leaf(p.b2),
          ad::leaf(p.w3), ad::leaf(p.b3), ad::leaf(p.wr), ad::leaf(p.br)};
}

CompressionNodes compression_leaves(const CompressionParams& p) {
  return {ad::leaf(p.w_down), ad::leaf(p.b_down), ad::leaf(p.w_up), ad::leaf(p.b_up)};
}

ad::Ptr encode_agent_graph(const ad::Ptr& obs, const EncoderNodes& e) {
  auto h1 = ad::tanh_op(ad::conv2d(obs, e.w1, e.b1));
  auto h2 = ad::tanh_op(ad::conv2d(h1, e.w2, e.b2));
  return ad::conv2d(h2, e.w3, e.b3);
}

ad::Ptr compress_graph(const ad::Ptr& feat, const CompressionConfig& cfg,
                       const CompressionNodes* c) {
  cfg.validate(feat->val.dim(0));
  if (cfg.rate == 0) return feat;
  if (c == nullptr) throw std::invalid_argument("compress_graph: missing bottleneck parameters");
  auto mid = ad::conv2d(feat, c->w_down, c->b_down);
  return ad::conv2d(mid, c->w_up, c->b_up);
}

ad::Ptr fuse_graph(const std::vector<ad::Ptr>& feats, FusionMode mode) {
  if (feats.empty()) throw std::invalid_argument("fuse_graph: empty feature list");
  return mode == FusionMode::kMax ? ad::max_stack(feats) : ad::mean_stack(feats);
}

ad::Ptr refine_graph(const ad::Ptr& fused, const EncoderNodes& e) {
  return ad::tanh_op(ad::conv2d(fused, e.wr, e.br));
}

}  // namespace hyperv2x::fusion
