#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "hyperv2x/tensor.hpp"

namespace hyperv2x::metrics {

/// Intersection-over-union of two boolean masks; 1.0 when both are empty.
double iou(const std::vector<std::uint8_t>& pred, const std::vector<std::uint8_t>& gt);

struct BinStat {
  double lo = 0.0, hi = 0.0;
  std::int64_t count = 0;
  double acc = 0.0, conf = 0.0;
};

/// Equal-width confidence bins over [0,1]; sample with confidence q falls in
/// bin min(floor(q*M), M-1).
std::vector<BinStat> reliability_bins(const std::vector<double>& confidences,
                                      const std::vector<std::uint8_t>& correctness,
                                      std::int64_t m_bins);

/// Expected calibration error: sum_m |B_m|/N * |acc(B_m) - conf(B_m)|.
double ece(const std::vector<double>& confidences, const std::vector<std::uint8_t>& correctness,
           std::int64_t m_bins);

/// Mean over pixels of sum_c (p_c - y_c)^2 against one-hot labels.
double brier(const Tensor& mean_probs, const GridI& labels);

/// Mean over pixels of -log(max(p[y], floor)).
double nll(const Tensor& mean_probs, const GridI& labels, double floor = 1e-12);

/// Per-pixel max-probability confidences and argmax correctness, flattened in
/// row-major order. Argmax ties break toward the lowest class index.
void pixel_confidence_stream(const Tensor& mean_probs, const GridI& labels,
                             std::vector<double>& confidences,
                             std::vector<std::uint8_t>& correctness);

/// Foreground mask of the argmax prediction (any class != 0).
std::vector<std::uint8_t> argmax_foreground(const Tensor& mean_probs);
std::vector<std::uint8_t> gt_foreground(const GridI& labels);
GridI argmax_classes(const Tensor& mean_probs);

struct CalibrationReport {
  double vehicle_iou = 0.0;
  double ece = 0.0;
  double brier = 0.0;
  double nll = 0.0;
  std::vector<BinStat> bins;
  std::int64_t m_bins = 15;
  std::int64_t num_classes = 0;
  std::int64_t num_scenes = 0;
  std::int64_t num_pixels = 0;
  double ue_mean = 0.0, ue_max = 0.0;
  double ua_mean = 0.0, ua_max = 0.0;
  std::string model;
  int compression_rate = 0;
  std::int64_t cv_bytes = 0;
};

/// Streaming accumulator so a whole split can be pooled scene by scene.
class ReportAccumulator {
 public:
  ReportAccumulator(std::int64_t m_bins, std::int64_t num_classes);

  void add_scene(const Tensor& mean_probs, const GridI& labels, const Tensor& epistemic,
                 const Tensor& aleatoric);
  /// Same, but the IoU foreground mask is supplied explicitly (late-fusion
  /// baselines OR per-agent masks instead of thresholding mean_probs).
  void add_scene_with_mask(const Tensor& mean_probs, const GridI& labels, const Tensor& epistemic,
                           const Tensor& aleatoric, const std::vector<std::uint8_t>& pred_fg);
  CalibrationReport finish() const;

 private:
  std::int64_t m_bins_, num_classes_;
  std::int64_t inter_ = 0, uni_ = 0;
  double brier_sum_ = 0.0, nll_sum_ = 0.0;
  std::int64_t pixels_ = 0, scenes_ = 0;
  double ue_sum_ = 0.0, ue_max_ = 0.0, ua_sum_ = 0.0, ua_max_ = 0.0;
  std::vector<double> conf_;
  std::vector<std::uint8_t> correct_;
};

}  // namespace hyperv2x::metrics
