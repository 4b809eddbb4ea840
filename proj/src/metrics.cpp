#include "hyperv2x/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace hyperv2x::metrics {

double iou(const std::vector<std::uint8_t>& pred, const std::vector<std::uint8_t>& gt) {
  if (pred.size() != gt.size()) throw std::invalid_argument("iou: mask size mismatch");
  std::int64_t inter = 0, uni = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const bool p = pred[i] != 0, g = gt[i] != 0;
    inter += p && g;
    uni += p || g;
  }
  return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

std::vector<BinStat> reliability_bins(const std::vector<double>& confidences,
                                      const std::vector<std::uint8_t>& correctness,
                                      std::int64_t m_bins) {
  if (confidences.empty()) throw std::invalid_argument("reliability_bins: empty input");
  if (confidences.size() != correctness.size())
    throw std::invalid_argument("reliability_bins: length mismatch");
  if (m_bins < 1) throw std::invalid_argument("reliability_bins: m_bins must be >= 1");
  std::vector<BinStat> bins(static_cast<std::size_t>(m_bins));
  for (std::int64_t m = 0; m < m_bins; ++m) {
    bins[static_cast<std::size_t>(m)].lo = static_cast<double>(m) / static_cast<double>(m_bins);
    bins[static_cast<std::size_t>(m)].hi =
        static_cast<double>(m + 1) / static_cast<double>(m_bins);
  }
  std::vector<double> acc_sum(static_cast<std::size_t>(m_bins), 0.0);
  std::vector<double> conf_sum(static_cast<std::size_t>(m_bins), 0.0);
  for (std::size_t i = 0; i < confidences.size(); ++i) {
    const double q = confidences[i];
    if (q < 0.0 || q > 1.0)
      throw std::invalid_argument("reliability_bins: confidence outside [0,1]");
    auto b = static_cast<std::int64_t>(q * static_cast<double>(m_bins));
    if (b >= m_bins) b = m_bins - 1;
    auto& bin = bins[static_cast<std::size_t>(b)];
    bin.count += 1;
    acc_sum[static_cast<std::size_t>(b)] += correctness[i] != 0 ? 1.0 : 0.0;
    conf_sum[static_cast<std::size_t>(b)] += q;
  }
  for (std::int64_t m = 0; m < m_bins; ++m) {
    auto& bin = bins[static_cast<std::size_t>(m)];
    if (bin.count > 0) {
      bin.acc = acc_sum[static_cast<std::size_t>(m)] / static_cast<double>(bin.count);
      bin.conf = conf_sum[static_cast<std::size_t>(m)] / static_cast<double>(bin.count);
    }
  }
  return bins;
}

double ece(const std::vector<double>& confidences, const std::vector<std::uint8_t>& correctness,
           std::int64_t m_bins) {
  const auto bins = reliability_bins(confidences, correctness, m_bins);
  const double n = static_cast<double>(confidences.size());
  double e = 0.0;
  for (const auto& bin : bins) {
    if (bin.count == 0) continue;  // empty bins contribute nothing
    e += static_cast<double>(bin.count) / n * std::fabs(bin.acc - bin.conf);
  }
  return e;
}

double brier(const Tensor& mean_probs, const GridI& labels) {
  if (mean_probs.rank() != 3 || mean_probs.dim(1) != labels.h || mean_probs.dim(2) != labels.w)
    throw std::invalid_argument("brier: shape mismatch");
  const std::int64_t c = mean_probs.dim(0), hw = labels.h * labels.w;
  double sum = 0.0;
  for (std::int64_t px = 0; px < hw; ++px) {
    const auto y = labels.v[static_cast<std::size_t>(px)];
    if (y < 0 || y >= c) throw std::invalid_argument("brier: label out of range");
    for (std::int64_t ch = 0; ch < c; ++ch) {
      const double d = mean_probs[ch * hw + px] - (ch == y ? 1.0 : 0.0);
      sum += d * d;
    }
  }
  return sum / static_cast<double>(hw);
}

double nll(const Tensor& mean_probs, const GridI& labels, double floor) {
  if (mean_probs.rank() != 3 || mean_probs.dim(1) != labels.h || mean_probs.dim(2) != labels.w)
    throw std::invalid_argument("nll: shape mismatch");
  const std::int64_t c = mean_probs.dim(0), hw = labels.h * labels.w;
  double sum = 0.0;
  for (std::int64_t px = 0; px < hw; ++px) {
    const auto y = labels.v[static_cast<std::size_t>(px)];
    if (y < 0 || y >= c) throw std::invalid_argument("nll: label out of range");
    sum -= std::log(std::max(mean_probs[y * hw + px], floor));
  }
  return sum / static_cast<double>(hw);
}

void pixel_confidence_stream(const Tensor& mean_probs, const GridI& labels,
                             std::vector<double>& confidences,
                             std::vector<std::uint8_t>& correctness) {
  if (mean_probs.rank() != 3 || mean_probs.dim(1) != labels.h || mean_probs.dim(2) != labels.w)
    throw std::invalid_argument("pixel_confidence_stream: shape mismatch");
  const std::int64_t c = mean_probs.dim(0), hw = labels.h * labels.w;
  confidences.reserve(confidences.size() + static_cast<std::size_t>(hw));
  correctness.reserve(correctness.size() + static_cast<std::size_t>(hw));
  for (std::int64_t px = 0; px < hw; ++px) {
    std::int64_t best = 0;
    double best_p = mean_probs[px];
    for (std::int64_t ch = 1; ch < c; ++ch) {
      const double p = mean_probs[ch * hw + px];
      if (p > best_p) {  // strict: ties keep the lowest class index
        best_p = p;
        best = ch;
      }
    }
    confidences.push_back(best_p);
    correctness.push_back(best == labels.v[static_cast<std::size_t>(px)] ? 1 : 0);
  }
}

GridI argmax_classes(const Tensor& mean_probs) {
  const std::int64_t c = mean_probs.dim(0), h = mean_probs.dim(1), w = mean_probs.dim(2);
  GridI out(h, w);
  const std::int64_t hw = h * w;
  for (std::int64_t px = 0; px < hw; ++px) {
    std::int64_t best = 0;
    double best_p = mean_probs[px];
    for (std::int64_t ch = 1; ch < c; ++ch) {
      const double p = mean_probs[ch * hw + px];
      if (p > best_p) {
        best_p = p;
        best = ch;
      }
    }
    out.v[static_cast<std::size_t>(px)] = static_cast<std::int32_t>(best);
  }
  return out;
}

std::vector<std::uint8_t> argmax_foreground(const Tensor& mean_probs) {
  const GridI cls = argmax_classes(mean_probs);
  std::vector<std::uint8_t> mask(cls.v.size());
  for (std::size_t i = 0; i < cls.v.size(); ++i) mask[i] = cls.v[i] != 0 ? 1 : 0;
  return mask;
}

std::vector<std::uint8_t> gt_foreground(const GridI& labels) {
  std::vector<std::uint8_t> mask(labels.v.size());
  for (std::size_t i = 0; i < labels.v.size(); ++i) mask[i] = labels.v[i] != 0 ? 1 : 0;
  return mask;
}

ReportAccumulator::ReportAccumulator(std::int64_t m_bins, std::int64_t num_classes)
    : m_bins_(m_bins), num_classes_(num_classes) {}

void ReportAccumulator::add_scene(const Tensor& mean_probs, const GridI& labels,
                                  const Tensor& epistemic, const Tensor& aleatoric) {
  add_scene_with_mask(mean_probs, labels, epistemic, aleatoric, argmax_foreground(mean_probs));
}

void ReportAccumulator::add_scene_with_mask(const Tensor& mean_probs, const GridI& labels,
                                            const Tensor& epistemic, const Tensor& aleatoric,
                                            const std::vector<std::uint8_t>& pred_fg) {
  const auto gt_fg = gt_foreground(labels);
  for (std::size_t i = 0; i < pred_fg.size(); ++i) {
    inter_ += pred_fg[i] && gt_fg[i];
    uni_ += pred_fg[i] || gt_fg[i];
  }
  const std::int64_t hw = labels.h * labels.w;
  brier_sum_ += brier(mean_probs, labels) * static_cast<double>(hw);
  nll_sum_ += nll(mean_probs, labels) * static_cast<double>(hw);
  pixel_confidence_stream(mean_probs, labels, conf_, correct_);
  for (double x : epistemic.v) {
    ue_sum_ += x;
    ue_max_ = std::max(ue_max_, x);
  }
  for (double x : aleatoric.v) {
    ua_sum_ += x;
    ua_max_ = std::max(ua_max_, x);
  }
  pixels_ += hw;
  scenes_ += 1;
}

CalibrationReport ReportAccumulator::finish() const {
  if (pixels_ == 0) throw std::runtime_error("ReportAccumulator: no scenes added");
  CalibrationReport r;
  r.vehicle_iou = uni_ == 0 ? 1.0 : static_cast<double>(inter_) / static_cast<double>(uni_);
  r.ece = ece(conf_, correct_, m_bins_);
  r.bins = reliability_bins(conf_, correct_, m_bins_);
  r.brier = brier_sum_ / static_cast<double>(pixels_);
  r.nll = nll_sum_ / static_cast<double>(pixels_);
  r.m_bins = m_bins_;
  r.num_classes = num_classes_;
  r.num_scenes = scenes_;
  r.num_pixels = pixels_;
  r.ue_mean = ue_sum_ / static_cast<double>(pixels_);
  r.ue_max = ue_max_;
  r.ua_mean = ua_sum_ / static_cast<double>(pixels_);
  r.ua_max = ua_max_;
  return r;
}

}  // namespace hyperv2x::metrics
