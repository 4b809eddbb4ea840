#include "hyperv2x/model.hpp"

#include <stdexcept>

namespace hyperv2x {

std::string variant_name(Variant v) {
  switch (v) {
    case Variant::kDeterministic: return "deterministic";
    case Variant::kHyper: return "hyper";
    case Variant::kNoise: return "noise";
    case Variant::kMcDropout: return "mcdropout";
  }
  throw std::logic_error("variant_name: unknown variant");
}

Variant variant_from_name(const std::string& name) {
  if (name == "deterministic") return Variant::kDeterministic;
  if (name == "hyper") return Variant::kHyper;
  if (name == "noise") return Variant::kNoise;
  if (name == "mcdropout") return Variant::kMcDropout;
  throw std::invalid_argument("unknown variant: " + name +
                              " (expected hyper|noise|mcdropout|deterministic)");
}

hyper::HypernetSpec Model::hspec() const {
  hyper::HypernetSpec s;
  s.in_dim = fspec.channels;
  s.hidden = hyper_hidden;
  s.param_count = dec::param_count(dspec);
  return s;
}

dec::WeightManifest Model::manifest() const { return dec::WeightManifest::for_spec(dspec); }

Model Model::make(Variant variant, const fusion::FeatureSpec& fspec, const dec::DecoderSpec& dspec,
                  const fusion::CompressionConfig& comp_cfg, std::int64_t hyper_hidden,
                  double logvar_bias, std::uint64_t seed) {
  fspec.validate();
  dspec.validate();
  comp_cfg.validate(fspec.channels);
  if (dspec.in_channels != fspec.channels)
    throw std::invalid_argument("Model::make: decoder input channels must equal fused channels");
  Model m;
  m.fspec = fspec;
  m.dspec = dspec;
  m.comp_cfg = comp_cfg;
  m.variant = variant;
  m.hyper_hidden = hyper_hidden;
  Rng rng = Rng(seed).split(0x4d4fULL);
  m.enc = fusion::EncoderParams::init(fspec, rng);
  if (comp_cfg.rate > 0) m.comp = fusion::CompressionParams::init(fspec.channels, comp_cfg.rate, rng);
  if (variant == Variant::kHyper || variant == Variant::kNoise)
    m.hnet = hyper::HypernetParams::init(m.hspec(), rng, logvar_bias);
  Rng theta_rng = rng.split(0xdecULL);
  m.det_theta = dec::init_weights(dspec, theta_rng);
  return m;
}

void Model::warm_start_from(const Model& pretrained) {
  if (pretrained.fspec.channels != fspec.channels ||
      pretrained.dspec.in_channels != dspec.in_channels ||
      pretrained.dspec.hidden != dspec.hidden ||
      pretrained.dspec.num_classes != dspec.num_classes)
    throw std::invalid_argument("warm_start_from: incompatible pretrained model");
  enc = pretrained.enc;
  det_theta = pretrained.det_theta;
  if (variant == Variant::kHyper || variant == Variant::kNoise) hnet.b_mu = pretrained.det_theta;
}

std::vector<NamedTensor> trainable_params(Model& m, bool freeze_encoder) {
  std::vector<NamedTensor> out;
  if (!freeze_encoder) {
    out.push_back({"enc.w1", &m.enc.w1});
    out.push_back({"enc.b1", &m.enc.b1});
    out.push_back({"enc.w2", &m.enc.w2});
    out.push_back({"enc.b2", &m.enc.b2});
    out.push_back({"enc.w3", &m.enc.w3});
    out.push_back({"enc.b3", &m.enc.b3});
    out.push_back({"enc.wr", &m.enc.wr});
    out.push_back({"enc.br", &m.enc.br});
  }
  if (m.comp_cfg.rate > 0) {
    out.push_back({"comp.w_down", &m.comp.w_down});
    out.push_back({"comp.b_down", &m.comp.b_down});
    out.push_back({"comp.w_up", &m.comp.w_up});
    out.push_back({"comp.b_up", &m.comp.b_up});
  }
  if (m.variant == Variant::kHyper || m.variant == Variant::kNoise) {
    out.push_back({"hnet.w1", &m.hnet.w1});
    out.push_back({"hnet.b1", &m.hnet.b1});
    out.push_back({"hnet.w2", &m.hnet.w2});
    out.push_back({"hnet.b2", &m.hnet.b2});
    out.push_back({"hnet.w_mu", &m.hnet.w_mu});
    out.push_back({"hnet.b_mu", &m.hnet.b_mu});
    out.push_back({"hnet.w_lv", &m.hnet.w_lv});
    out.push_back({"hnet.b_lv", &m.hnet.b_lv});
  } else {
    out.push_back({"det_theta", &m.det_theta});
  }
  return out;
}

std::vector<NamedTensor> all_params(Model& m) {
  auto out = trainable_params(m, false);
  if (m.variant == Variant::kHyper || m.variant == Variant::kNoise)
    out.push_back({"det_theta", &m.det_theta});
  return out;
}

// ---------------------------------------------------------------------------
// raw forward

namespace {

std::vector<const world::AgentObservation*> select_agents(const world::SceneRecord& rec,
                                                          bool ego_only) {
  if (rec.observations.empty())
    throw std::invalid_argument("forward: scene record has no observations");
  std::vector<const world::AgentObservation*> out;
  if (ego_only) {
    out.push_back(&rec.observations[0]);
  } else {
    for (const auto& o : rec.observations) out.push_back(&o);
  }
  return out;
}

}  // namespace

Tensor fused_features(const Model& m, const world::SceneRecord& rec, bool ego_only) {
  const auto agents = select_agents(rec, ego_only);
  std::vector<Tensor> warped;
  for (const auto* obs : agents) {
    Tensor feat = fusion::encode_agent(obs->grid, m.enc, m.fspec);
    const auto comp = fusion::compress(feat, m.comp_cfg, &m.comp);
    const Pose2& pose = rec.scene.agent_poses.at(static_cast<std::size_t>(obs->agent_index));
    warped.push_back(
        fusion::warp_to_ego(comp.features, Se2::from_pose(pose), m.fspec.cell_size_m));
  }
  return fusion::refine(fusion::fuse(warped, m.fusion_mode), m.enc);
}

ScenePrediction predict_scene(const Model& m, const world::SceneRecord& rec, std::int64_t k,
                              std::uint64_t seed, bool ego_only) {
  ScenePrediction out;
  const Tensor g = fused_features(m, rec, ego_only);
  switch (m.variant) {
    case Variant::kDeterministic: {
      std::vector<hyper::WeightSample> samples{{m.det_theta, 1}};
      out.pred = dec::forward_k(g, samples, m.dspec);
      break;
    }
    case Variant::kMcDropout: {
      Rng rng = Rng(seed).split(0xd70ULL);
      out.pred.probs = Tensor({k, m.dspec.num_classes, g.dim(1), g.dim(2)});
      const std::int64_t plane = m.dspec.num_classes * g.dim(1) * g.dim(2);
      for (std::int64_t i = 0; i < k; ++i) {
        const Tensor probs = ad::kernels::softmax_channel(
            dec::decode_dropout(g, m.det_theta, m.dspec, m.dropout_rate, rng));
        std::copy(probs.v.begin(), probs.v.end(), out.pred.probs.v.begin() + i * plane);
      }
      break;
    }
    case Variant::kHyper:
    case Variant::kNoise: {
      const Tensor cond = m.variant == Variant::kHyper
                              ? hyper::context_embed(g)
                              : hyper::noise_condition(m.fspec.channels, m.noise_cond_std,
                                                       Rng(seed).split(0xc0dULL).next_u64());
      out.post = hyper::posterior(cond, m.hnet, m.hspec());
      const auto samples = hyper::sample_weights(out.post, k, Rng(seed).split(0x5edULL).next_u64());
      out.pred = dec::forward_k(g, samples, m.dspec);
      break;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// training graphs

namespace {

struct FusedGraphParts {
  ad::Ptr g;
  std::map<std::string, ad::Ptr> leaves;
};

FusedGraphParts build_fused_graph(const Model& m, const world::SceneRecord& rec, bool ego_only,
                                  bool freeze_encoder) {
  FusedGraphParts parts;
  fusion::EncoderNodes enc;
  if (freeze_encoder) {
    enc = {ad::constant(m.enc.w1), ad::constant(m.enc.b1), ad::constant(m.enc.w2),
           ad::constant(m.enc.b2), ad::constant(m.enc.w3), ad::constant(m.enc.b3),
           ad::constant(m.enc.wr), ad::constant(m.enc.br)};
  } else {
    enc = fusion::encoder_leaves(m.enc);
    parts.leaves = {{"enc.w1", enc.w1}, {"enc.b1", enc.b1}, {"enc.w2", enc.w2},
                    {"enc.b2", enc.b2}, {"enc.w3", enc.w3}, {"enc.b3", enc.b3},
                    {"enc.wr", enc.wr}, {"enc.br", enc.br}};
  }
  fusion::CompressionNodes comp;
  const bool compressed = m.comp_cfg.rate > 0;
  if (compressed) {
    comp = fusion::compression_leaves(m.comp);
    parts.leaves.insert({{"comp.w_down", comp.w_down},
                         {"comp.b_down", comp.b_down},
                         {"comp.w_up", comp.w_up},
                         {"comp.b_up", comp.b_up}});
  }

  const auto agents = select_agents(rec, ego_only);
  std::vector<ad::Ptr> warped;
  for (const auto* obs : agents) {
    auto feat = fusion::encode_agent_graph(ad::constant(obs->grid), enc);
    feat = fusion::compress_graph(feat, m.comp_cfg, compressed ? &comp : nullptr);
    const Pose2& pose = rec.scene.agent_poses.at(static_cast<std::size_t>(obs->agent_index));
    warped.push_back(ad::warp(feat, Se2::from_pose(pose), m.fspec.cell_size_m));
  }
  parts.g = fusion::refine_graph(fusion::fuse_graph(warped, m.fusion_mode), enc);
  return parts;
}

}  // namespace

LossGraph build_stochastic_loss(const Model& m, const world::SceneRecord& rec,
                                const std::vector<double>& class_weights, double lambda_nll,
                                double lambda_kl, const StochasticLossOptions& opt) {
  if (m.variant != Variant::kHyper && m.variant != Variant::kNoise)
    throw std::invalid_argument("build_stochastic_loss: model has no hypernetwork");
  if (opt.eps.empty()) throw std::invalid_argument("build_stochastic_loss: need >= 1 eps draw");

  LossGraph lg;
  auto fused = build_fused_graph(m, rec, /*ego_only=*/false, opt.freeze_encoder);
  lg.fused = fused.g;
  lg.leaves = std::move(fused.leaves);

  const auto hn = hyper::hypernet_leaves(m.hnet);
  lg.leaves.insert({{"hnet.w1", hn.w1},
                    {"hnet.b1", hn.b1},
                    {"hnet.w2", hn.w2},
                    {"hnet.b2", hn.b2},
                    {"hnet.w_mu", hn.w_mu},
                    {"hnet.b_mu", hn.b_mu},
                    {"hnet.w_lv", hn.w_lv},
                    {"hnet.b_lv", hn.b_lv}});

  const ad::Ptr cond = opt.conditioning != nullptr ? ad::constant(*opt.conditioning)
                                                   : ad::spatial_mean(lg.fused);
  const auto post = hyper::posterior_graph(cond, hn);

  const auto k = static_cast<std::int64_t>(opt.eps.size());
  ad::Ptr seg_sum;
  std::vector<ad::Ptr> prob_maps;
  for (std::int64_t i = 0; i < k; ++i) {
    auto theta = hyper::reparam_sample_graph(post, opt.eps[static_cast<std::size_t>(i)]);
    auto logits = dec::decode_graph(lg.fused, theta, m.dspec);
    auto ce = ad::weighted_ce(logits, rec.scene.gt_semantic, class_weights);
    seg_sum = seg_sum ? ad::add(seg_sum, ce) : ce;
    prob_maps.push_back(ad::softmax_channel(logits));
  }
  lg.seg = ad::scale(seg_sum, 1.0 / static_cast<double>(k));
  auto mean_probs = ad::mean_stack(prob_maps);
  lg.nll = ad::nll_from_probs(mean_probs, rec.scene.gt_semantic);

  // KL(N(mu, diag sigma^2) || N(0, I)) / P
  const std::int64_t p = post.mu->val.numel();
  auto mu2 = ad::mul(post.mu, post.mu);
  auto kl_inner = ad::add_scalar(
      ad::add(mu2, ad::sub(ad::exp_op(post.log_var), post.log_var)), -1.0);
  lg.kl = ad::scale(ad::sum_all(kl_inner), 0.5 / static_cast<double>(p));

  lg.total = ad::add(lg.seg, ad::add(ad::scale(lg.nll, lambda_nll), ad::scale(lg.kl, lambda_kl)));
  return lg;
}

LossGraph build_deterministic_loss(const Model& m, const world::SceneRecord& rec,
                                   const std::vector<double>& class_weights,
                                   const DeterministicLossOptions& opt) {
  LossGraph lg;
  auto fused = build_fused_graph(m, rec, opt.ego_only, opt.freeze_encoder);
  lg.fused = fused.g;
  lg.leaves = std::move(fused.leaves);

  auto theta = ad::leaf(m.det_theta);
  lg.leaves.emplace("det_theta", theta);
  ad::Ptr logits;
  if (opt.dropout_mask1 != nullptr && opt.dropout_mask2 != nullptr) {
    logits = dec::decode_graph_dropout(lg.fused, theta, m.dspec, *opt.dropout_mask1,
                                       *opt.dropout_mask2, opt.keep_scale);
  } else {
    logits = dec::decode_graph(lg.fused, theta, m.dspec);
  }
  lg.seg = ad::weighted_ce(logits, rec.scene.gt_semantic, class_weights);
  lg.nll = ad::nll_from_probs(ad::softmax_channel(logits), rec.scene.gt_semantic);
  lg.kl = ad::constant(Tensor::scalar(0.0));
  lg.total = lg.seg;
  return lg;
}

}  // namespace hyperv2x
