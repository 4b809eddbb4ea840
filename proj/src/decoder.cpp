#include "hyperv2x/decoder.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>

#include "hyperv2x/io.hpp"

namespace hyperv2x::dec {

void DecoderSpec::validate() const {
  if (in_channels < 1 || hidden < 1 || num_classes < 2)
    throw std::invalid_argument("DecoderSpec: in_channels/hidden >= 1, num_classes >= 2");
}

std::uint64_t DecoderSpec::hash() const {
  const std::string repr = "decoder:" + std::to_string(in_channels) + ":" +
                           std::to_string(hidden) + ":" + std::to_string(num_classes);
  return io::fnv1a(repr);
}

WeightManifest WeightManifest::for_spec(const DecoderSpec& spec) {
  spec.validate();
  WeightManifest m;
  std::int64_t off = 0;
  auto push = [&m, &off](const std::string& name, std::vector<std::int64_t> shape) {
    ManifestEntry e;
    e.name = name;
    e.shape = std::move(shape);
    e.offset = off;
    e.length = Tensor::numel_of(e.shape);
    off += e.length;
    m.entries.push_back(std::move(e));
  };
  push("conv1.w", {spec.hidden, spec.in_channels, 3, 3});
  push("conv1.b", {spec.hidden});
  push("conv2.w", {spec.hidden, spec.hidden, 3, 3});
  push("conv2.b", {spec.hidden});
  push("head.w", {spec.num_classes, spec.hidden, 1, 1});
  push("head.b", {spec.num_classes});
  m.param_count = off;
  return m;
}

std::uint64_t WeightManifest::hash() const {
  std::string repr;
  for (const auto& e : entries) {
    repr += e.name + "@" + std::to_string(e.offset) + shape_str(e.shape) + ";";
  }
  repr += "P=" + std::to_string(param_count);
  return io::fnv1a(repr);
}

const ManifestEntry& WeightManifest::entry(const std::string& name) const {
  for (const auto& e : entries)
    if (e.name == name) return e;
  throw std::invalid_argument("WeightManifest: no entry named " + name);
}

std::int64_t param_count(const DecoderSpec& spec) {
  return WeightManifest::for_spec(spec).param_count;
}

Tensor flatten_weights(const std::vector<Tensor>& layer_tensors, const WeightManifest& m) {
  if (layer_tensors.size() != m.entries.size())
    throw std::invalid_argument("flatten_weights: tensor count mismatch");
  Tensor theta({m.param_count});
  for (std::size_t i = 0; i < m.entries.size(); ++i) {
    const auto& e = m.entries[i];
    if (layer_tensors[i].shape != e.shape)
      throw std::invalid_argument("flatten_weights: shape mismatch at " + e.name);
    std::copy(layer_tensors[i].v.begin(), layer_tensors[i].v.end(),
              theta.v.begin() + e.offset);
  }
  return theta;
}

std::vector<Tensor> unflatten_weights(const Tensor& theta, const WeightManifest& m) {
  if (theta.numel() != m.param_count)
    throw std::invalid_argument("unflatten_weights: theta length " +
                                std::to_string(theta.numel()) + " != P " +
                                std::to_string(m.param_count));
  std::vector<Tensor> out;
  for (const auto& e : m.entries) {
    Tensor t(e.shape);
    std::copy(theta.v.begin() + e.offset, theta.v.begin() + e.offset + e.length, t.v.begin());
    out.push_back(std::move(t));
  }
  return out;
}

Tensor init_weights(const DecoderSpec& spec, Rng& rng) {
  const WeightManifest m = WeightManifest::for_spec(spec);
  Tensor theta({m.param_count});
  for (const auto& e : m.entries) {
    if (e.shape.size() == 1) continue;  // biases start at zero
    const std::int64_t fan_in = e.length / e.shape[0];
    const double s = std::sqrt(2.0 / static_cast<double>(fan_in + e.shape[0]));
    for (std::int64_t i = 0; i < e.length; ++i) theta[e.offset + i] = rng.normal(0.0, s);
  }
  return theta;
}

namespace {

struct Slices {
  Tensor w1, b1, w2, b2, w3, b3;
};

Slices slice_theta(const Tensor& theta, const DecoderSpec& spec) {
  const WeightManifest m = WeightManifest::for_spec(spec);
  if (theta.numel() != m.param_count)
    throw std::invalid_argument("decode: weight vector length " + std::to_string(theta.numel()) +
                                " does not match param_count " + std::to_string(m.param_count));
  auto grab = [&theta, &m](const char* name) {
    const auto& e = m.entry(name);
    Tensor t(e.shape);
    std::copy(theta.v.begin() + e.offset, theta.v.begin() + e.offset + e.length, t.v.begin());
    return t;
  };
  return {grab("conv1.w"), grab("conv1.b"), grab("conv2.w"),
          grab("conv2.b"), grab("head.w"),  grab("head.b")};
}

}  // namespace

Tensor decode(const Tensor& g, const Tensor& theta, const DecoderSpec& spec) {
  spec.validate();
  if (g.rank() != 3 || g.dim(0) != spec.in_channels)
    throw std::invalid_argument("decode: feature map shape " + shape_str(g.shape) +
                                " does not match decoder input channels");
  const Slices s = slice_theta(theta, spec);
  Tensor h1 = ad::kernels::conv2d_same(g, s.w1, s.b1);
  for (auto& x : h1.v) x = std::tanh(x);
  Tensor h2 = ad::kernels::conv2d_same(h1, s.w2, s.b2);
  for (auto& x : h2.v) x = std::tanh(x);
  return ad::kernels::conv2d_same(h2, s.w3, s.b3);
}

StochasticPrediction forward_k(const Tensor& g, const std::vector<hyper::WeightSample>& samples,
                               const DecoderSpec& spec) {
  if (samples.empty()) throw std::invalid_argument("forward_k: empty sample list");
  const auto k = static_cast<std::int64_t>(samples.size());
  StochasticPrediction pred;
  pred.probs = Tensor({k, spec.num_classes, g.dim(1), g.dim(2)});
  const std::int64_t plane = spec.num_classes * g.dim(1) * g.dim(2);
  for (std::int64_t i = 0; i < k; ++i) {
    const Tensor probs = ad::kernels::softmax_channel(
        decode(g, samples[static_cast<std::size_t>(i)].theta, spec));
    std::copy(probs.v.begin(), probs.v.end(), pred.probs.v.begin() + i * plane);
  }
  return pred;
}

Tensor decode_dropout(const Tensor& g, const Tensor& theta, const DecoderSpec& spec, double rate,
                      Rng& rng) {
  if (rate < 0.0 || rate >= 1.0)
    throw std::invalid_argument("decode_dropout: rate must be in [0,1)");
  const Slices s = slice_theta(theta, spec);
  const double keep_scale = 1.0 / (1.0 - rate);
  auto mask_channels = [&rng, rate, keep_scale](Tensor& h) {
    const std::int64_t c = h.dim(0), hw = h.dim(1) * h.dim(2);
    for (std::int64_t ch = 0; ch < c; ++ch) {
      const double m = rng.uniform() < rate ? 0.0 : keep_scale;
      for (std::int64_t i = 0; i < hw; ++i) h[ch * hw + i] *= m;
    }
  };
  Tensor h1 = ad::kernels::conv2d_same(g, s.w1, s.b1);
  for (auto& x : h1.v) x = std::tanh(x);
  mask_channels(h1);
  Tensor h2 = ad::kernels::conv2d_same(h1, s.w2, s.b2);
  for (auto& x : h2.v) x = std::tanh(x);
  mask_channels(h2);
  return ad::kernels::conv2d_same(h2, s.w3, s.b3);
}

namespace {

struct GraphSlices {
  ad::Ptr w1, b1, w2, b2, w3, b3;
};

GraphSlices slice_theta_graph(const ad::Ptr& theta, const DecoderSpec& spec) {
  const WeightManifest m = WeightManifest::for_spec(spec);
  if (theta->val.numel() != m.param_count)
    throw std::invalid_argument("decode_graph: weight vector length mismatch");
  auto grab = [&theta, &m](const char* name) {
    const auto& e = m.entry(name);
    return ad::reshape(ad::slice(theta, e.offset, e.length), e.shape);
  };
  return {grab("conv1.w"), grab("conv1.b"), grab("conv2.w"),
          grab("conv2.b"), grab("head.w"),  grab("head.b")};
}

}  // namespace

ad::Ptr decode_graph(const ad::Ptr& g, const ad::Ptr& theta, const DecoderSpec& spec) {
  const GraphSlices s = slice_theta_graph(theta, spec);
  auto h1 = ad::tanh_op(ad::conv2d(g, s.w1, s.b1));
  auto h2 = ad::tanh_op(ad::conv2d(h1, s.w2, s.b2));
  return ad::conv2d(h2, s.w3, s.b3);
}

ad::Ptr decode_graph_dropout(const ad::Ptr& g, const ad::Ptr& theta, const DecoderSpec& spec,
                             const Tensor& mask1, const Tensor& mask2, double keep_scale) {
  const GraphSlices s = slice_theta_graph(theta, spec);
  Tensor m1 = mask1, m2 = mask2;
  for (auto& x : m1.v) x *= keep_scale;
  for (auto& x : m2.v) x *= keep_scale;
  auto h1 = ad::channel_scale(ad::tanh_op(ad::conv2d(g, s.w1, s.b1)), m1);
  auto h2 = ad::channel_scale(ad::tanh_op(ad::conv2d(h1, s.w2, s.b2)), m2);
  return ad::conv2d(h2, s.w3, s.b3);
}

}  // namespace hyperv2x::dec
