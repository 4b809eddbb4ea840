#include "hyperv2x/autodiff.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <unordered_set>

namespace hyperv2x::ad {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using MapConstMat = Eigen::Map<const RowMat>;
using MapVec = Eigen::Map<Eigen::VectorXd>;
using MapConstVec = Eigen::Map<const Eigen::VectorXd>;

namespace {

Ptr make_node(Tensor val, std::vector<Ptr> parents, std::function<void(Node&)> back) {
  auto n = std::make_shared<Node>();
  n->val = std::move(val);
  n->parents = std::move(parents);
  for (const auto& p : n->parents) n->requires_grad = n->requires_grad || p->requires_grad;
  if (n->requires_grad) n->back = std::move(back);
  return n;
}

void ensure_grad(const Ptr& n) {
  if (n->grad.v.empty()) n->grad = Tensor::zeros(n->val.shape);
}

void check_same_shape(const Ptr& a, const Ptr& b, const char* op) {
  if (!a->val.same_shape(b->val))
    throw std::invalid_argument(std::string(op) + ": shape mismatch " + shape_str(a->val.shape) +
                                " vs " + shape_str(b->val.shape));
}

}  // namespace

Ptr leaf(Tensor t) {
  auto n = std::make_shared<Node>();
  n->val = std::move(t);
  n->requires_grad = true;
  return n;
}

Ptr constant(Tensor t) {
  auto n = std::make_shared<Node>();
  n->val = std::move(t);
  return n;
}

void backward(const Ptr& root) {
  if (root->val.numel() != 1) throw std::invalid_argument("backward: root must be scalar");
  // iterative post-order DFS; reversed it yields each node before its parents
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, std::size_t>> stack{{root.get(), 0}};
  visited.insert(root.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node* p = node->parents[next].get();
      ++next;
      if (p->requires_grad && visited.insert(p).second) stack.emplace_back(p, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
  for (Node* n : order) {
    if (n->grad.v.empty()) n->grad = Tensor::zeros(n->val.shape);
  }
  root->grad.v[0] = 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->back) n->back(*n);
  }
}

// ---------------------------------------------------------------------------
// elementwise

Ptr add(const Ptr& a, const Ptr& b) {
  check_same_shape(a, b, "add");
  Tensor out = a->val;
  for (std::int64_t i = 0; i < out.numel(); ++i) out[i] += b->val[i];
  return make_node(std::move(out), {a, b}, [](Node& n) {
    for (int which = 0; which < 2; ++which) {
      const Ptr& p = n.parents[static_cast<std::size_t>(which)];
      if (!p->requires_grad) continue;
      ensure_grad(p);
      for (std::int64_t i = 0; i < n.grad.numel(); ++i) p->grad[i] += n.grad[i];
    }
  });
}

Ptr sub(const Ptr& a, const Ptr& b) { return add(a, scale(b, -1.0)); }

Ptr mul(const Ptr& a, const Ptr& b) {
  check_same_shape(a, b, "mul");
  Tensor out = a->val;
  for (std::int64_t i = 0; i < out.numel(); ++i) out[i] *= b->val[i];
  return make_node(std::move(out), {a, b}, [](Node& n) {
    const Ptr &a = n.parents[0], &b = n.parents[1];
    if (a->requires_grad) {
      ensure_grad(a);
      for (std::int64_t i = 0; i < n.grad.numel(); ++i) a->grad[i] += n.grad[i] * b->val[i];
    }
    if (b->requires_grad) {
      ensure_grad(b);
      for (std::int64_t i = 0; i < n.grad.numel(); ++i) b->grad[i] += n.grad[i] * a->val[i];
    }
  });
}

Ptr scale(const Ptr& a, double s) {
  Tensor out = a->val;
  for (auto& x : out.v) x *= s;
  return make_node(std::move(out), {a}, [s](Node& n) {
    const Ptr& a = n.parents[0];
    ensure_grad(a);
    for (std::int64_t i = 0; i < n.grad.numel(); ++i) a->grad[i] += s * n.grad[i];
  });
}

Ptr add_scalar(const Ptr& a, double s) {
  Tensor out = a->val;
  for (auto& x : out.v) x += s;
  return make_node(std::move(out), {a}, [](Node& n) {
    const Ptr& a = n.parents[0];
    ensure_grad(a);
    for (std::int64_t i = 0; i < n.grad.numel(); ++i) a->grad[i] += n.grad[i];
  });
}

Ptr tanh_op(const Ptr& a) {
  Tensor out = a->val;
  for (auto& x : out.v) x = std::tanh(x);
  return make_node(std::move(out), {a}, [](Node& n) {
    const Ptr& a = n.parents[0];
    ensure_grad(a);
    for (std::int64_t i = 0; i < n.grad.numel(); ++i) {
      const double y = n.val[i];
      a->grad[i] += n.grad[i] * (1.0 - y * y);
    }
  });
}

Ptr exp_op(const Ptr& a) {
  Tensor out = a->val;
  for (auto& x : out.v) x = std::exp(x);
  return make_node(std::move(out), {a}, [](Node& n) {
    const Ptr& a = n.parents[0];
    ensure_grad(a);
    for (std::int64_t i = 0; i < n.grad.numel(); ++i) a->grad[i] += n.grad[i] * n.val[i];
  });
}

Ptr clamp_op(const Ptr& a, double lo, double hi) {
  Tensor out = a->val;
  for (auto& x : out.v) x = std::clamp(x, lo, hi);
  return make_node(std::move(out), {a}, [lo, hi](Node& n) {
    const Ptr& a = n.parents[0];
    ensure_grad(a);
    for (std::int64_t i = 0; i < n.grad.numel(); ++i) {
      const double x = a->val[i];
      if (x > lo && x < hi) a->grad[i] += n.grad[i];
    }
  });
}

// ---------------------------------------------------------------------------
// shape

Ptr slice(const Ptr& a, std::int64_t offset, std::int64_t length) {
  if (offset < 0 || length < 0 || offset + length > a->val.numel())
    throw std::invalid_argument("slice: range out of bounds");
  Tensor out({length});
  std::copy(a->val.v.begin() + offset, a->val.v.begin() + offset + length, out.v.begin());
  return make_node(std::move(out), {a}, [offset](Node& n) {
    const Ptr& a = n.parents[0];
    ensure_grad(a);
    for (std::int64_t i = 0; i < n.grad.numel(); ++i) a->grad[offset + i] += n.grad[i];
  });
}

Ptr reshape(const Ptr& a, std::vector<std::int64_t> shape) {
  if (Tensor::numel_of(shape) != a->val.numel())
    throw std::invalid_argument("reshape: element count mismatch");
  Tensor out = Tensor::wrap(std::move(shape), a->val.v);
  return make_node(std::move(out), {a}, [](Node& n) {
    const Ptr& a = n.parents[0];
    ensure_grad(a);
    for (std::int64_t i = 0; i < n.grad.numel(); ++i) a->grad[i] += n.grad[i];
  });
}

Ptr sum_all(const Ptr& a) {
  double s = 0.0;
  for (double x : a->val.v) s += x;
  return make_node(Tensor::scalar(s), {a}, [](Node& n) {
    const Ptr& a = n.parents[0];
    ensure_grad(a);
    const double g = n.grad[0];
    for (std::int64_t i = 0; i < a->grad.numel(); ++i) a->grad[i] += g;
  });
}

// ---------------------------------------------------------------------------
// linear algebra / nn

Ptr affine(const Ptr& w, const Ptr& x, const Ptr& b) {
  if (w->val.rank() != 2 || x->val.rank() != 1 || b->val.rank() != 1 ||
      w->val.dim(1) != x->val.dim(0) || w->val.dim(0) != b->val.dim(0))
    throw std::invalid_argument("affine: dimension mismatch");
  const std::int64_t o = w->val.dim(0), i = w->val.dim(1);
  Tensor out({o});
  MapConstMat W(w->val.v.data(), o, i);
  MapConstVec X(x->val.v.data(), i);
  MapVec Y(out.v.data(), o);
  Y.noalias() = W * X;
  for (std::int64_t k = 0; k < o; ++k) out[k] += b->val[k];
  return make_node(std::move(out), {w, x, b}, [o, i](Node& n) {
    const Ptr &w = n.parents[0], &x = n.parents[1], &b = n.parents[2];
    MapConstVec dY(n.grad.v.data(), o);
    if (w->requires_grad) {
      ensure_grad(w);
      MapMat dW(w->grad.v.data(), o, i);
      MapConstVec X(x->val.v.data(), i);
      dW.noalias() += dY * X.transpose();
    }
    if (x->requires_grad) {
      ensure_grad(x);
      MapConstMat W(w->val.v.data(), o, i);
      MapVec dX(x->grad.v.data(), i);
      dX.noalias() += W.transpose() * dY;
    }
    if (b->requires_grad) {
      ensure_grad(b);
      MapVec dB(b->grad.v.data(), o);
      dB.noalias() += dY;
    }
  });
}

namespace kernels {

namespace {

// im2col for 'same' zero padding, stride 1: out is [C*kh*kw, H*W]
RowMat im2col(const Tensor& x, std::int64_t kh, std::int64_t kw) {
  const std::int64_t c = x.dim(0), h = x.dim(1), w = x.dim(2);
  const std::int64_t ph = kh / 2, pw = kw / 2;
  RowMat col = RowMat::Zero(c * kh * kw, h * w);
  for (std::int64_t ch = 0; ch < c; ++ch) {
    for (std::int64_t ki = 0; ki < kh; ++ki) {
      for (std::int64_t kj = 0; kj < kw; ++kj) {
        const std::int64_t row = (ch * kh + ki) * kw + kj;
        for (std::int64_t i = 0; i < h; ++i) {
          const std::int64_t si = i + ki - ph;
          if (si < 0 || si >= h) continue;
          for (std::int64_t j = 0; j < w; ++j) {
            const std::int64_t sj = j + kj - pw;
            if (sj < 0 || sj >= w) continue;
            col(row, i * w + j) = x.at(ch, si, sj);
          }
        }
      }
    }
  }
  return col;
}

void col2im_accum(const RowMat& col, std::int64_t kh, std::int64_t kw, Tensor& dx) {
  const std::int64_t c = dx.dim(0), h = dx.dim(1), w = dx.dim(2);
  const std::int64_t ph = kh / 2, pw = kw / 2;
  for (std::int64_t ch = 0; ch < c; ++ch) {
    for (std::int64_t ki = 0; ki < kh; ++ki) {
      for (std::int64_t kj = 0; kj < kw; ++kj) {
        const std::int64_t row = (ch * kh + ki) * kw + kj;
        for (std::int64_t i = 0; i < h; ++i) {
          const std::int64_t si = i + ki - ph;
          if (si < 0 || si >= h) continue;
          for (std::int64_t j = 0; j < w; ++j) {
            const std::int64_t sj = j + kj - pw;
            if (sj < 0 || sj >= w) continue;
            dx.at(ch, si, sj) += col(row, i * w + j);
          }
        }
      }
    }
  }
}

void check_conv_shapes(const Tensor& x, const Tensor& w, const Tensor& b) {
  if (x.rank() != 3 || w.rank() != 4 || b.rank() != 1)
    throw std::invalid_argument("conv2d: expected x[C,H,W], w[O,C,kh,kw], b[O]");
  if (w.dim(1) != x.dim(0) || w.dim(0) != b.dim(0))
    throw std::invalid_argument("conv2d: channel mismatch, x " + shape_str(x.shape) + " w " +
                                shape_str(w.shape));
  if (w.dim(2) % 2 == 0 || w.dim(3) % 2 == 0)
    throw std::invalid_argument("conv2d: kernel sides must be odd for same padding");
}

}  // namespace

Tensor conv2d_same(const Tensor& x, const Tensor& w, const Tensor& b) {
  check_conv_shapes(x, w, b);
  const std::int64_t o = w.dim(0), kh = w.dim(2), kw = w.dim(3);
  const std::int64_t h = x.dim(1), ww = x.dim(2);
  const RowMat col = im2col(x, kh, kw);
  Tensor y({o, h, ww});
  MapConstMat W(w.v.data(), o, w.dim(1) * kh * kw);
  MapMat Y(y.v.data(), o, h * ww);
  Y.noalias() = W * col;
  for (std::int64_t oc = 0; oc < o; ++oc) Y.row(oc).array() += b[oc];
  return y;
}

void conv2d_same_backward(const Tensor& x, const Tensor& w, const Tensor& dy, Tensor* dx,
                          Tensor* dw, Tensor* db) {
  const std::int64_t o = w.dim(0), kh = w.dim(2), kw = w.dim(3);
  const std::int64_t h = x.dim(1), ww = x.dim(2);
  MapConstMat dY(dy.v.data(), o, h * ww);
  if (db != nullptr) {
    for (std::int64_t oc = 0; oc < o; ++oc) (*db)[oc] += dY.row(oc).sum();
  }
  if (dw != nullptr) {
    const RowMat col = im2col(x, kh, kw);
    MapMat dW(dw->v.data(), o, w.dim(1) * kh * kw);
    dW.noalias() += dY * col.transpose();
  }
  if (dx != nullptr) {
    MapConstMat W(w.v.data(), o, w.dim(1) * kh * kw);
    const RowMat dcol = W.transpose() * dY;
    col2im_accum(dcol, kh, kw, *dx);
  }
}

Tensor bilinear_warp(const Tensor& x, const Se2& src_to_dst, double cell) {
  if (x.rank() != 3) throw std::invalid_argument("warp: expected [C,H,W]");
  const Se2 dst_to_src = src_to_dst.inverse();
  const std::int64_t c = x.dim(0), h = x.dim(1), w = x.dim(2);
  Tensor y({c, h, w});
  for (std::int64_t i = 0; i < h; ++i) {
    for (std::int64_t j = 0; j < w; ++j) {
      double px, py;
      cell_center(i, j, h, w, cell, px, py);
      double sx, sy;
      dst_to_src.apply(px, py, sx, sy);
      const double u = sx / cell + 0.5 * static_cast<double>(w) - 0.5;
      const double v = sy / cell + 0.5 * static_cast<double>(h) - 0.5;
      const auto j0 = static_cast<std::int64_t>(std::floor(u));
      const auto i0 = static_cast<std::int64_t>(std::floor(v));
      const double fu = u - static_cast<double>(j0), fv = v - static_cast<double>(i0);
      for (std::int64_t ch = 0; ch < c; ++ch) {
        double acc = 0.0;
        for (int di = 0; di < 2; ++di) {
          for (int dj = 0; dj < 2; ++dj) {
            const std::int64_t si = i0 + di, sj = j0 + dj;
            if (si < 0 || si >= h || sj < 0 || sj >= w) continue;
            const double wgt = (di ? fv : 1.0 - fv) * (dj ? fu : 1.0 - fu);
            acc += wgt * x.at(ch, si, sj);
          }
        }
        y.at(ch, i, j) = acc;
      }
    }
  }
  return y;
}

void bilinear_warp_backward(const Se2& src_to_dst, double cell, const Tensor& dy, Tensor& dx) {
  const Se2 dst_to_src = src_to_dst.inverse();
  const std::int64_t c = dy.dim(0), h = dy.dim(1), w = dy.dim(2);
  for (std::int64_t i = 0; i < h; ++i) {
    for (std::int64_t j = 0; j < w; ++j) {
      double px, py;
      cell_center(i, j, h, w, cell, px, py);
      double sx, sy;
      dst_to_src.apply(px, py, sx, sy);
      const double u = sx / cell + 0.5 * static_cast<double>(w) - 0.5;
      const double v = sy / cell + 0.5 * static_cast<double>(h) - 0.5;
      const auto j0 = static_cast<std::int64_t>(std::floor(u));
      const auto i0 = static_cast<std::int64_t>(std::floor(v));
      const double fu = u - static_cast<double>(j0), fv = v - static_cast<double>(i0);
      for (std::int64_t ch = 0; ch < c; ++ch) {
        const double g = dy.at(ch, i, j);
        if (g == 0.0) continue;
        for (int di = 0; di < 2; ++di) {
          for (int dj = 0; dj < 2; ++dj) {
            const std::int64_t si = i0 + di, sj = j0 + dj;
            if (si < 0 || si >= h || sj < 0 || sj >= w) continue;
            const double wgt = (di ? fv : 1.0 - fv) * (dj ? fu : 1.0 - fu);
            dx.at(ch, si, sj) += g * wgt;
          }
        }
      }
    }
  }
}

Tensor softmax_channel(const Tensor& logits) {
  if (logits.rank() != 3) throw std::invalid_argument("softmax_channel: expected [C,H,W]");
  const std::int64_t c = logits.dim(0), h = logits.dim(1), w = logits.dim(2);
  Tensor p({c, h, w});
  for (std::int64_t i = 0; i < h; ++i) {
    for (std::int64_t j = 0; j < w; ++j) {
      double mx = -1e300;
      for (std::int64_t k = 0; k < c; ++k) mx = std::max(mx, logits.at(k, i, j));
      double z = 0.0;
      for (std::int64_t k = 0; k < c; ++k) {
        const double e = std::exp(logits.at(k, i, j) - mx);
        p.at(k, i, j) = e;
        z += e;
      }
      for (std::int64_t k = 0; k < c; ++k) p.at(k, i, j) /= z;
    }
  }
  return p;
}

}  // namespace kernels

Ptr conv2d(const Ptr& x, const Ptr& w, const Ptr& b) {
  Tensor y = kernels::conv2d_same(x->val, w->val, b->val);
  return make_node(std::move(y), {x, w, b}, [](Node& n) {
    const Ptr &x = n.parents[0], &w = n.parents[1], &b = n.parents[2];
    Tensor* dx = nullptr;
    Tensor* dw = nullptr;
    Tensor* db = nullptr;
    if (x->requires_grad) {
      ensure_grad(x);
      dx = &x->grad;
    }
    if (w->requires_grad) {
      ensure_grad(w);
      dw = &w->grad;
    }
    if (b->requires_grad) {
      ensure_grad(b);
      db = &b->grad;
    }
    kernels::conv2d_same_backward(x->val, w->val, n.grad, dx, dw, db);
  });
}

Ptr warp(const Ptr& x, const Se2& src_to_dst, double cell) {
  Tensor y = kernels::bilinear_warp(x->val, src_to_dst, cell);
  return make_node(std::move(y), {x}, [src_to_dst, cell](Node& n) {
    const Ptr& x = n.parents[0];
    ensure_grad(x);
    kernels::bilinear_warp_backward(src_to_dst, cell, n.grad, x->grad);
  });
}

Ptr max_stack(const std::vector<Ptr>& xs) {
  if (xs.empty()) throw std::invalid_argument("max_stack: empty input list");
  for (const auto& x : xs) check_same_shape(xs[0], x, "max_stack");
  const std::int64_t n = xs[0]->val.numel();
  Tensor out = xs[0]->val;
  auto argmax = std::make_shared<std::vector<std::int32_t>>(static_cast<std::size_t>(n), 0);
  for (std::size_t k = 1; k < xs.size(); ++k) {
    for (std::int64_t i = 0; i < n; ++i) {
      if (xs[k]->val[i] > out[i]) {
        out[i] = xs[k]->val[i];
        (*argmax)[static_cast<std::size_t>(i)] = static_cast<std::int32_t>(k);
      }
    }
  }
  std::vector<Ptr> parents(xs.begin(), xs.end());
  return make_node(std::move(out), std::move(parents), [argmax, n](Node& node) {
    for (const auto& p : node.parents)
      if (p->requires_grad) ensure_grad(p);
    for (std::int64_t i = 0; i < n; ++i) {
      const Ptr& p = node.parents[(*argmax)[static_cast<std::size_t>(i)]];
      if (p->requires_grad) p->grad[i] += node.grad[i];
    }
  });
}

Ptr mean_stack(const std::vector<Ptr>& xs) {
  if (xs.empty()) throw std::invalid_argument("mean_stack: empty input list");
  for (const auto& x : xs) check_same_shape(xs[0], x, "mean_stack");
  const double inv = 1.0 / static_cast<double>(xs.size());
  Tensor out = Tensor::zeros(xs[0]->val.shape);
  for (const auto& x : xs)
    for (std::int64_t i = 0; i < out.numel(); ++i) out[i] += x->val[i];
  for (auto& x : out.v) x *= inv;
  std::vector<Ptr> parents(xs.begin(), xs.end());
  return make_node(std::move(out), std::move(parents), [inv](Node& node) {
    for (const auto& p : node.parents) {
      if (!p->requires_grad) continue;
      ensure_grad(p);
      for (std::int64_t i = 0; i < node.grad.numel(); ++i) p->grad[i] += inv * node.grad[i];
    }
  });
}

Ptr spatial_mean(const Ptr& x) {
  if (x->val.rank() != 3) throw std::invalid_argument("spatial_mean: expected [C,H,W]");
  const std::int64_t c = x->val.dim(0), hw = x->val.dim(1) * x->val.dim(2);
  if (hw == 0) throw std::invalid_argument("spatial_mean: zero-sized spatial grid");
  Tensor out({c});
  for (std::int64_t ch = 0; ch < c; ++ch) {
    double s = 0.0;
    for (std::int64_t i = 0; i < hw; ++i) s += x->val[ch * hw + i];
    out[ch] = s / static_cast<double>(hw);
  }
  return make_node(std::move(out), {x}, [c, hw](Node& n) {
    const Ptr& x = n.parents[0];
    ensure_grad(x);
    for (std::int64_t ch = 0; ch < c; ++ch) {
      const double g = n.grad[ch] / static_cast<double>(hw);
      for (std::int64_t i = 0; i < hw; ++i) x->grad[ch * hw + i] += g;
    }
  });
}

Ptr channel_scale(const Ptr& x, const Tensor& per_channel) {
  if (x->val.rank() != 3 || per_channel.numel() != x->val.dim(0))
    throw std::invalid_argument("channel_scale: expected [C,H,W] and [C]");
  const std::int64_t c = x->val.dim(0), hw = x->val.dim(1) * x->val.dim(2);
  Tensor out = x->val;
  for (std::int64_t ch = 0; ch < c; ++ch)
    for (std::int64_t i = 0; i < hw; ++i) out[ch * hw + i] *= per_channel[ch];
  Tensor scale_copy = per_channel;
  return make_node(std::move(out), {x}, [c, hw, scale_copy](Node& n) {
    const Ptr& x = n.parents[0];
    ensure_grad(x);
    for (std::int64_t ch = 0; ch < c; ++ch)
      for (std::int64_t i = 0; i < hw; ++i)
        x->grad[ch * hw + i] += n.grad[ch * hw + i] * scale_copy[ch];
  });
}

Ptr softmax_channel(const Ptr& logits) {
  Tensor p = kernels::softmax_channel(logits->val);
  return make_node(std::move(p), {logits}, [](Node& n) {
    const Ptr& logits = n.parents[0];
    ensure_grad(logits);
    const std::int64_t c = n.val.dim(0), h = n.val.dim(1), w = n.val.dim(2);
    for (std::int64_t i = 0; i < h; ++i) {
      for (std::int64_t j = 0; j < w; ++j) {
        double dot = 0.0;
        for (std::int64_t k = 0; k < c; ++k) dot += n.grad.at(k, i, j) * n.val.at(k, i, j);
        for (std::int64_t k = 0; k < c; ++k)
          logits->grad.at(k, i, j) += n.val.at(k, i, j) * (n.grad.at(k, i, j) - dot);
      }
    }
  });
}

Ptr weighted_ce(const Ptr& logits, const GridI& labels, const std::vector<double>& class_weights) {
  const std::int64_t c = logits->val.dim(0), h = logits->val.dim(1), w = logits->val.dim(2);
  if (labels.h != h || labels.w != w)
    throw std::invalid_argument("weighted_ce: label grid shape mismatch");
  if (static_cast<std::int64_t>(class_weights.size()) != c)
    throw std::invalid_argument("weighted_ce: class weight count mismatch");
  auto probs = std::make_shared<Tensor>(kernels::softmax_channel(logits->val));
  const double inv_n = 1.0 / static_cast<double>(h * w);
  double loss = 0.0;
  for (std::int64_t i = 0; i < h; ++i) {
    for (std::int64_t j = 0; j < w; ++j) {
      const auto y = labels.at(i, j);
      if (y < 0 || y >= c) throw std::invalid_argument("weighted_ce: label out of range");
      loss -= class_weights[static_cast<std::size_t>(y)] *
              std::log(std::max(probs->at(y, i, j), 1e-300)) * inv_n;
    }
  }
  GridI labels_copy = labels;
  std::vector<double> wts = class_weights;
  return make_node(Tensor::scalar(loss), {logits},
                   [probs, labels_copy, wts, c, h, w, inv_n](Node& n) {
                     const Ptr& logits = n.parents[0];
                     ensure_grad(logits);
                     const double g = n.grad[0];
                     for (std::int64_t i = 0; i < h; ++i) {
                       for (std::int64_t j = 0; j < w; ++j) {
                         const auto y = labels_copy.at(i, j);
                         const double wy = wts[static_cast<std::size_t>(y)];
                         for (std::int64_t k = 0; k < c; ++k) {
                           const double ind = k == y ? 1.0 : 0.0;
                           logits->grad.at(k, i, j) +=
                               g * wy * inv_n * (probs->at(k, i, j) - ind);
                         }
                       }
                     }
                   });
}

Ptr nll_from_probs(const Ptr& probs, const GridI& labels, double floor) {
  const std::int64_t c = probs->val.dim(0), h = probs->val.dim(1), w = probs->val.dim(2);
  if (labels.h != h || labels.w != w)
    throw std::invalid_argument("nll_from_probs: label grid shape mismatch");
  const double inv_n = 1.0 / static_cast<double>(h * w);
  double loss = 0.0;
  for (std::int64_t i = 0; i < h; ++i) {
    for (std::int64_t j = 0; j < w; ++j) {
      const auto y = labels.at(i, j);
      if (y < 0 || y >= c) throw std::invalid_argument("nll_from_probs: label out of range");
      loss -= std::log(std::max(probs->val.at(y, i, j), floor)) * inv_n;
    }
  }
  GridI labels_copy = labels;
  return make_node(Tensor::scalar(loss), {probs}, [labels_copy, floor, h, w, inv_n](Node& n) {
    const Ptr& probs = n.parents[0];
    ensure_grad(probs);
    const double g = n.grad[0];
    for (std::int64_t i = 0; i < h; ++i) {
      for (std::int64_t j = 0; j < w; ++j) {
        const auto y = labels_copy.at(i, j);
        const double p = probs->val.at(y, i, j);
        if (p > floor) probs->grad.at(y, i, j) -= g * inv_n / p;
      }
    }
  });
}

}  // namespace hyperv2x::ad
