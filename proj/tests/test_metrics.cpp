#include <doctest.h>

#include <cmath>

#include "hyperv2x/metrics.hpp"
#include "hyperv2x/rng.hpp"
#include "oracles.hpp"

using namespace hyperv2x;
using namespace hyperv2x::metrics;

TEST_CASE("iou: identical, disjoint, hand-counted, both-empty") {
  const std::vector<std::uint8_t> a = {1, 1, 0, 0};
  CHECK(iou(a, a) == 1.0);
  const std::vector<std::uint8_t> b = {0, 0, 1, 1};
  CHECK(iou(a, b) == 0.0);
  // pred = top row of a 2x2 grid, gt = left column: intersection 1, union 3
  const std::vector<std::uint8_t> top = {1, 1, 0, 0};
  const std::vector<std::uint8_t> left = {1, 0, 1, 0};
  CHECK(iou(top, left) == doctest::Approx(1.0 / 3.0));
  const std::vector<std::uint8_t> empty = {0, 0, 0, 0};
  CHECK(iou(empty, empty) == 1.0);
  CHECK_THROWS_AS(iou(a, {1, 0}), std::invalid_argument);
}

TEST_CASE("ece: perfect calibration, the hand-binned case, permutation invariance") {
  CHECK(ece({1.0, 1.0, 1.0}, {1, 1, 1}, 10) == 0.0);

  const std::vector<double> conf = {0.8, 0.8, 0.6, 0.6};
  const std::vector<std::uint8_t> correct = {1, 0, 1, 0};
  CHECK(ece(conf, correct, 1) == doctest::Approx(0.2).epsilon(1e-12));

  const std::vector<double> conf_perm = {0.6, 0.8, 0.6, 0.8};
  const std::vector<std::uint8_t> correct_perm = {1, 1, 0, 0};
  CHECK(ece(conf, correct, 7) == doctest::Approx(ece(conf_perm, correct_perm, 7)).epsilon(1e-12));

  CHECK_THROWS_AS(ece({}, {}, 5), std::invalid_argument);
}

TEST_CASE("ece equals the brute-force oracle on 1000 random inputs") {
  Rng rng(1);
  for (int trial = 0; trial < 1000; ++trial) {
    const auto n = rng.uniform_int(1, 60);
    const auto m = rng.uniform_int(1, 20);
    std::vector<double> conf(static_cast<std::size_t>(n));
    std::vector<std::uint8_t> correct(static_cast<std::size_t>(n));
    for (std::int64_t i = 0; i < n; ++i) {
      conf[static_cast<std::size_t>(i)] = rng.uniform();
      correct[static_cast<std::size_t>(i)] = rng.uniform() < 0.5 ? 1 : 0;
    }
    const double fast = ece(conf, correct, m);
    const double slow = oracles::ece_bruteforce(conf, correct, m);
    REQUIRE(std::fabs(fast - slow) <= 1e-9);
    REQUIRE(fast >= 0.0);
    REQUIRE(fast <= 1.0);
  }
}

TEST_CASE("constant-confidence single-bin ece equals |accuracy - confidence|") {
  std::vector<double> conf(40, 0.75);
  std::vector<std::uint8_t> correct(40, 0);
  for (std::size_t i = 0; i < 10; ++i) correct[i] = 1;  // accuracy 0.25
  CHECK(ece(conf, correct, 1) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("reliability bins cover [0,1], disjointly, and count every sample") {
  Rng rng(2);
  std::vector<double> conf;
  std::vector<std::uint8_t> correct;
  for (int i = 0; i < 500; ++i) {
    conf.push_back(rng.uniform());
    correct.push_back(rng.uniform() < 0.6 ? 1 : 0);
  }
  const auto bins = reliability_bins(conf, correct, 15);
  std::int64_t total = 0;
  double prev_hi = 0.0;
  for (std::size_t m = 0; m < bins.size(); ++m) {
    if (m == 0) CHECK(bins[m].lo == 0.0);
    if (m + 1 == bins.size()) CHECK(bins[m].hi == 1.0);
    if (m > 0) CHECK(bins[m].lo == doctest::Approx(prev_hi));
    prev_hi = bins[m].hi;
    total += bins[m].count;
  }
  CHECK(total == 500);
}

TEST_CASE("brier: exact one-hot, uniform binary, wrong one-hot maximum") {
  GridI labels(1, 1);
  labels.at(0, 0) = 0;
  const Tensor exact({2, 1, 1}, {1.0, 0.0});
  CHECK(brier(exact, labels) == 0.0);
  const Tensor half({2, 1, 1}, {0.5, 0.5});
  CHECK(brier(half, labels) == doctest::Approx(0.5).epsilon(1e-12));
  const Tensor wrong({2, 1, 1}, {0.0, 1.0});
  CHECK(brier(wrong, labels) == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("brier of the uniform prediction matches the closed form for C = 2, 3") {
  // sum_c (1/C - y_c)^2 = (C-1)/C^2 + (1 - 1/C)^2
  for (std::int64_t c : {2, 3}) {
    GridI labels(2, 2);
    const Tensor uniform = Tensor::full({c, 2, 2}, 1.0 / static_cast<double>(c));
    const double cd = static_cast<double>(c);
    const double closed = (cd - 1.0) / (cd * cd) + (1.0 - 1.0 / cd) * (1.0 - 1.0 / cd);
    CHECK(brier(uniform, labels) == doctest::Approx(closed).epsilon(1e-12));
  }
}

TEST_CASE("nll: perfect, half, and clamped-zero predictions") {
  GridI labels(1, 1);
  labels.at(0, 0) = 1;
  const Tensor perfect({2, 1, 1}, {0.0, 1.0});
  CHECK(nll(perfect, labels) == 0.0);
  const Tensor half({2, 1, 1}, {0.5, 0.5});
  CHECK(nll(half, labels) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  const Tensor zero({2, 1, 1}, {1.0, 0.0});
  CHECK(nll(zero, labels) == doctest::Approx(-std::log(1e-12)).epsilon(1e-12));
  CHECK(std::isfinite(nll(zero, labels)));
}

TEST_CASE("uniform-prediction nll equals max-entropy aleatoric level ln C") {
  GridI labels(3, 3);
  for (std::int64_t c : {2, 3, 5}) {
    const Tensor uniform = Tensor::full({c, 3, 3}, 1.0 / static_cast<double>(c));
    CHECK(nll(uniform, labels) == doctest::Approx(std::log(static_cast<double>(c))).epsilon(1e-12));
  }
}

TEST_CASE("pixel confidence stream: uniform maps, tie rule, manual 2x2 case") {
  GridI labels(1, 1);
  const Tensor uniform = Tensor::full({3, 1, 1}, 1.0 / 3.0);
  std::vector<double> conf;
  std::vector<std::uint8_t> correct;
  pixel_confidence_stream(uniform, labels, conf, correct);
  CHECK(conf[0] == doctest::Approx(1.0 / 3.0));
  CHECK(correct[0] == 1);  // tie resolves to class 0, which is the label

  // manual 2x2 multi-class case
  GridI l2(2, 2);
  l2.at(0, 0) = 0;
  l2.at(0, 1) = 1;
  l2.at(1, 0) = 1;
  l2.at(1, 1) = 0;
  Tensor probs({2, 2, 2}, {0.9, 0.2, 0.4, 0.7,   // class 0 plane
                           0.1, 0.8, 0.6, 0.3});  // class 1 plane
  conf.clear();
  correct.clear();
  pixel_confidence_stream(probs, l2, conf, correct);
  CHECK(conf == std::vector<double>{0.9, 0.8, 0.6, 0.7});
  CHECK(correct == std::vector<std::uint8_t>{1, 1, 1, 1});
}

TEST_CASE("report accumulator pools scenes consistently") {
  Rng rng(3);
  ReportAccumulator acc(10, 2);
  GridI labels(4, 4);
  for (std::int64_t i = 0; i < 8; ++i) labels.v[static_cast<std::size_t>(i)] = 1;
  Tensor probs({2, 4, 4});
  const std::int64_t hw = 16;
  for (std::int64_t px = 0; px < hw; ++px) {
    const double p1 = 0.1 + 0.8 * rng.uniform();
    probs[px] = 1.0 - p1;
    probs[hw + px] = p1;
  }
  const Tensor ue = Tensor::full({4, 4}, 0.02);
  const Tensor ua = Tensor::full({4, 4}, 0.4);
  acc.add_scene(probs, labels, ue, ua);
  acc.add_scene(probs, labels, ue, ua);
  const auto report = acc.finish();
  CHECK(report.num_scenes == 2);
  CHECK(report.num_pixels == 32);
  CHECK(report.ece >= 0.0);
  CHECK(report.ece <= 1.0);
  CHECK(report.ue_mean == doctest::Approx(0.02));
  CHECK(report.ua_max == doctest::Approx(0.4));
  std::int64_t bin_total = 0;
  for (const auto& b : report.bins) bin_total += b.count;
  CHECK(bin_total == 32);
  // single-scene metrics match the pooled value when scenes are identical
  CHECK(report.brier == doctest::Approx(brier(probs, labels)).epsilon(1e-12));
  CHECK(report.nll == doctest::Approx(nll(probs, labels)).epsilon(1e-12));
}
