#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "hyperv2x/geometry.hpp"
#include "hyperv2x/tensor.hpp"

namespace hyperv2x::ad {

/// Reverse-mode autodiff over Tensor values. Graphs are built per forward
/// pass and discarded after backward(); parameters enter as leaves and
/// collect gradients there. Coverage is intentionally limited to the ops this
/// architecture needs.
struct Node {
  Tensor val;
  Tensor grad;  // allocated by backward()
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> back;  // pulls this->grad into parents' grads
};

using Ptr = std::shared_ptr<Node>;

Ptr leaf(Tensor t);        // trainable parameter
Ptr constant(Tensor t);    // input / frozen value

/// Seeds grad(root) = 1 (root must be scalar) and runs reverse sweep.
void backward(const Ptr& root);

// -- elementwise -------------------------------------------------------------
Ptr add(const Ptr& a, const Ptr& b);
Ptr sub(const Ptr& a, const Ptr& b);
Ptr mul(const Ptr& a, const Ptr& b);
Ptr scale(const Ptr& a, double s);
Ptr add_scalar(const Ptr& a, double s);
Ptr tanh_op(const Ptr& a);
Ptr exp_op(const Ptr& a);
Ptr clamp_op(const Ptr& a, double lo, double hi);

// -- shape -------------------------------------------------------------------
Ptr slice(const Ptr& a, std::int64_t offset, std::int64_t length);  // flat view
Ptr reshape(const Ptr& a, std::vector<std::int64_t> shape);
Ptr sum_all(const Ptr& a);  // -> [1]

// -- linear algebra / nn -----------------------------------------------------
Ptr affine(const Ptr& w, const Ptr& x, const Ptr& b);        // [o,i]·[i]+[o]
Ptr conv2d(const Ptr& x, const Ptr& w, const Ptr& b);        // same pad, stride 1
Ptr warp(const Ptr& x, const Se2& src_to_dst, double cell);  // bilinear inverse warp
Ptr max_stack(const std::vector<Ptr>& xs);
Ptr mean_stack(const std::vector<Ptr>& xs);
Ptr spatial_mean(const Ptr& x);                              // [C,H,W] -> [C]
Ptr channel_scale(const Ptr& x, const Tensor& per_channel);  // fixed mask/scale

// -- heads -------------------------------------------------------------------
Ptr softmax_channel(const Ptr& logits);  // softmax over dim 0 of [C,H,W]
/// Weighted mean cross-entropy over pixels: (1/N) Σ_px w[y]·(-log p[y]).
Ptr weighted_ce(const Ptr& logits, const GridI& labels, const std::vector<double>& class_weights);
/// Mean over pixels of -log(max(p[y], floor)), differentiable through probs.
Ptr nll_from_probs(const Ptr& probs, const GridI& labels, double floor = 1e-12);

// -- raw forward kernels (shared by the no-graph evaluation path) ------------
namespace kernels {
Tensor conv2d_same(const Tensor& x, const Tensor& w, const Tensor& b);
void conv2d_same_backward(const Tensor& x, const Tensor& w, const Tensor& dy, Tensor* dx,
                          Tensor* dw, Tensor* db);
Tensor bilinear_warp(const Tensor& x, const Se2& src_to_dst, double cell);
void bilinear_warp_backward(const Se2& src_to_dst, double cell, const Tensor& dy, Tensor& dx);
Tensor softmax_channel(const Tensor& logits);
}  // namespace kernels

}  // namespace hyperv2x::ad
