#include <doctest.h>

#include <cmath>
#include <functional>

#include "hyperv2x/autodiff.hpp"
#include "hyperv2x/rng.hpp"

using namespace hyperv2x;

namespace {

Tensor randn(std::vector<std::int64_t> shape, Rng& rng, double scale = 1.0) {
  Tensor t(std::move(shape));
  for (auto& x : t.v) x = scale * rng.normal();
  return t;
}

/// Max relative error between analytic gradients and central differences for
/// a scalar-valued graph over the given leaf tensors.
double fd_max_rel_err(const std::function<ad::Ptr(std::vector<ad::Ptr>&)>& build,
                      std::vector<Tensor> inputs, double eps = 1e-6) {
  std::vector<ad::Ptr> leaves;
  for (auto& t : inputs) leaves.push_back(ad::leaf(t));
  ad::Ptr root = build(leaves);
  ad::backward(root);

  double worst = 0.0;
  for (std::size_t li = 0; li < inputs.size(); ++li) {
    for (std::int64_t i = 0; i < inputs[li].numel(); ++i) {
      const double orig = inputs[li][i];
      auto eval = [&](double v) {
        inputs[li][i] = v;
        std::vector<ad::Ptr> fresh;
        for (auto& t : inputs) fresh.push_back(ad::leaf(t));
        return build(fresh)->val[0];
      };
      const double fd = (eval(orig + eps) - eval(orig - eps)) / (2.0 * eps);
      inputs[li][i] = orig;
      const double an = leaves[li]->grad.v.empty() ? 0.0 : leaves[li]->grad[i];
      const double scale = std::max({std::fabs(fd), std::fabs(an), 1e-6});
      worst = std::max(worst, std::fabs(fd - an) / scale);
    }
  }
  return worst;
}

}  // namespace

TEST_CASE("elementwise and reduction ops match finite differences") {
  Rng rng(1);
  auto build = [](std::vector<ad::Ptr>& in) {
    auto a = ad::tanh_op(in[0]);
    auto b = ad::exp_op(ad::scale(in[1], 0.3));
    auto c = ad::mul(a, b);
    auto d = ad::add(c, ad::add_scalar(in[0], 0.5));
    return ad::sum_all(ad::mul(d, d));
  };
  CHECK(fd_max_rel_err(build, {randn({4, 5}, rng), randn({4, 5}, rng)}) < 1e-6);
}

TEST_CASE("clamp passes gradients only strictly inside the interval") {
  Tensor x({3}, {-2.0, 0.2, 3.0});
  auto leaf = ad::leaf(x);
  auto root = ad::sum_all(ad::clamp_op(leaf, -1.0, 1.0));
  ad::backward(root);
  CHECK(leaf->grad[0] == 0.0);
  CHECK(leaf->grad[1] == 1.0);
  CHECK(leaf->grad[2] == 0.0);
}

TEST_CASE("slice and reshape route gradients to the right range") {
  Rng rng(2);
  auto build = [](std::vector<ad::Ptr>& in) {
    auto part = ad::reshape(ad::slice(in[0], 3, 4), {2, 2});
    return ad::sum_all(ad::mul(part, part));
  };
  CHECK(fd_max_rel_err(build, {randn({10}, rng)}) < 1e-6);
}

TEST_CASE("affine layer matches finite differences") {
  Rng rng(3);
  auto build = [](std::vector<ad::Ptr>& in) {
    return ad::sum_all(ad::tanh_op(ad::affine(in[0], in[1], in[2])));
  };
  CHECK(fd_max_rel_err(build, {randn({4, 6}, rng), randn({6}, rng), randn({4}, rng)}) < 1e-6);
}

TEST_CASE("conv2d matches finite differences for input, weight and bias") {
  Rng rng(4);
  auto build = [](std::vector<ad::Ptr>& in) {
    auto y = ad::conv2d(in[0], in[1], in[2]);
    return ad::sum_all(ad::mul(y, y));
  };
  CHECK(fd_max_rel_err(build, {randn({3, 5, 6}, rng), randn({4, 3, 3, 3}, rng), randn({4}, rng)},
                       1e-5) < 1e-6);
}

TEST_CASE("1x1 conv matches finite differences") {
  Rng rng(5);
  auto build = [](std::vector<ad::Ptr>& in) {
    auto y = ad::conv2d(in[0], in[1], in[2]);
    return ad::sum_all(ad::tanh_op(y));
  };
  CHECK(fd_max_rel_err(build, {randn({4, 3, 3}, rng), randn({2, 4, 1, 1}, rng), randn({2}, rng)}) <
        1e-6);
}

TEST_CASE("bilinear warp gradient matches finite differences") {
  Rng rng(6);
  const Se2 t = Se2::from_pose({0.7, -0.4, 0.6});
  auto build = [&t](std::vector<ad::Ptr>& in) {
    auto y = ad::warp(in[0], t, 0.5);
    return ad::sum_all(ad::mul(y, y));
  };
  CHECK(fd_max_rel_err(build, {randn({2, 6, 6}, rng)}) < 1e-6);
}

TEST_CASE("max and mean fusion gradients match finite differences") {
  Rng rng(7);
  auto build_max = [](std::vector<ad::Ptr>& in) {
    return ad::sum_all(ad::tanh_op(ad::max_stack({in[0], in[1], in[2]})));
  };
  auto build_mean = [](std::vector<ad::Ptr>& in) {
    return ad::sum_all(ad::tanh_op(ad::mean_stack({in[0], in[1], in[2]})));
  };
  std::vector<Tensor> xs = {randn({2, 4, 4}, rng), randn({2, 4, 4}, rng), randn({2, 4, 4}, rng)};
  CHECK(fd_max_rel_err(build_max, xs) < 1e-5);
  CHECK(fd_max_rel_err(build_mean, xs) < 1e-6);
}

TEST_CASE("softmax and loss heads match finite differences") {
  Rng rng(8);
  GridI labels(4, 4);
  for (std::int64_t i = 0; i < 16; ++i) labels.v[static_cast<std::size_t>(i)] = i % 3;
  const std::vector<double> wts = {1.0, 2.0, 0.5};

  auto build_ce = [&](std::vector<ad::Ptr>& in) { return ad::weighted_ce(in[0], labels, wts); };
  CHECK(fd_max_rel_err(build_ce, {randn({3, 4, 4}, rng)}) < 1e-6);

  auto build_nll = [&](std::vector<ad::Ptr>& in) {
    return ad::nll_from_probs(ad::softmax_channel(in[0]), labels);
  };
  CHECK(fd_max_rel_err(build_nll, {randn({3, 4, 4}, rng)}) < 1e-6);
}

TEST_CASE("spatial mean and channel scale match finite differences") {
  Rng rng(9);
  Tensor mask({3}, {1.25, 0.0, 2.0});
  auto build = [&mask](std::vector<ad::Ptr>& in) {
    auto z = ad::spatial_mean(ad::channel_scale(in[0], mask));
    return ad::sum_all(ad::mul(z, z));
  };
  CHECK(fd_max_rel_err(build, {randn({3, 4, 5}, rng)}) < 1e-6);
}

TEST_CASE("gradients accumulate across shared subgraphs") {
  // y = sum(x*x) + sum(x) uses x twice; d/dx = 2x + 1
  Tensor x({3}, {1.0, -2.0, 0.5});
  auto leaf = ad::leaf(x);
  auto root = ad::add(ad::sum_all(ad::mul(leaf, leaf)), ad::sum_all(leaf));
  ad::backward(root);
  for (std::int64_t i = 0; i < 3; ++i) CHECK(leaf->grad[i] == doctest::Approx(2.0 * x[i] + 1.0));
}

TEST_CASE("constants receive no gradient buffers") {
  auto c = ad::constant(Tensor({2}, {1.0, 2.0}));
  auto leaf = ad::leaf(Tensor({2}, {3.0, 4.0}));
  auto root = ad::sum_all(ad::mul(c, leaf));
  ad::backward(root);
  CHECK(c->grad.v.empty());
  CHECK(leaf->grad[0] == 1.0);
  CHECK(leaf->grad[1] == 2.0);
}

TEST_CASE("backward rejects non-scalar roots") {
  auto leaf = ad::leaf(Tensor({2}, {1.0, 2.0}));
  CHECK_THROWS_AS(ad::backward(leaf), std::invalid_argument);
}
