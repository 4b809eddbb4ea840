#pragma once

#include <cstdint>
#include <initializer_list>
#include <new>
#include <stdexcept>
#include <string>
#include <vector>

namespace hyperv2x {

/// 64-byte-aligned allocator. Eigen's vectorized reductions peel loops based
/// on the buffer address, so reruns are bit-identical only if every tensor
/// buffer carries the same alignment.
template <typename T>
struct AlignedAllocator {
  using value_type = T;
  static constexpr std::size_t kAlign = 64;

  AlignedAllocator() = default;
  template <typename U>
  AlignedAllocator(const AlignedAllocator<U>&) {}

  T* allocate(std::size_t n) {
    return static_cast<T*>(::operator new(n * sizeof(T), std::align_val_t(kAlign)));
  }
  void deallocate(T* p, std::size_t) noexcept { ::operator delete(p, std::align_val_t(kAlign)); }

  template <typename U>
  bool operator==(const AlignedAllocator<U>&) const {
    return true;
  }
  template <typename U>
  bool operator!=(const AlignedAllocator<U>&) const {
    return false;
  }
};

using F64Buffer = std::vector<double, AlignedAllocator<double>>;

inline bool operator==(const F64Buffer& a, const std::vector<double>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (a[i] != b[i]) return false;
  return true;
}
inline bool operator==(const std::vector<double>& a, const F64Buffer& b) { return b == a; }
inline bool operator!=(const F64Buffer& a, const std::vector<double>& b) { return !(a == b); }
inline bool operator!=(const std::vector<double>& a, const F64Buffer& b) { return !(b == a); }

/// Dense row-major tensor of doubles. Everything numeric in this project runs
/// at double precision so finite-difference checks are meaningful.
struct Tensor {
  std::vector<std::int64_t> shape;
  F64Buffer v;

  Tensor() = default;
  explicit Tensor(std::vector<std::int64_t> s) : shape(std::move(s)) {
    v.assign(static_cast<std::size_t>(numel_of(shape)), 0.0);
  }
  Tensor(std::vector<std::int64_t> s, const std::vector<double>& data) : shape(std::move(s)) {
    if (static_cast<std::int64_t>(data.size()) != numel_of(shape))
      throw std::invalid_argument("Tensor: data size does not match shape");
    v.assign(data.begin(), data.end());
  }
  static Tensor wrap(std::vector<std::int64_t> s, F64Buffer data) {
    Tensor t;
    t.shape = std::move(s);
    t.v = std::move(data);
    if (static_cast<std::int64_t>(t.v.size()) != numel_of(t.shape))
      throw std::invalid_argument("Tensor: data size does not match shape");
    return t;
  }

  static Tensor zeros(std::vector<std::int64_t> s) { return Tensor(std::move(s)); }
  static Tensor full(std::vector<std::int64_t> s, double value) {
    Tensor t(std::move(s));
    for (auto& x : t.v) x = value;
    return t;
  }
  static Tensor scalar(double value) { return Tensor({1}, {value}); }

  std::int64_t numel() const { return static_cast<std::int64_t>(v.size()); }
  int rank() const { return static_cast<int>(shape.size()); }
  std::int64_t dim(int i) const { return shape.at(static_cast<std::size_t>(i)); }

  double& operator[](std::int64_t i) { return v[static_cast<std::size_t>(i)]; }
  double operator[](std::int64_t i) const { return v[static_cast<std::size_t>(i)]; }

  // [C,H,W] indexing
  double& at(std::int64_t c, std::int64_t h, std::int64_t w) {
    return v[static_cast<std::size_t>((c * shape[1] + h) * shape[2] + w)];
  }
  double at(std::int64_t c, std::int64_t h, std::int64_t w) const {
    return v[static_cast<std::size_t>((c * shape[1] + h) * shape[2] + w)];
  }
  // [H,W] indexing
  double& at(std::int64_t h, std::int64_t w) {
    return v[static_cast<std::size_t>(h * shape[1] + w)];
  }
  double at(std::int64_t h, std::int64_t w) const {
    return v[static_cast<std::size_t>(h * shape[1] + w)];
  }

  bool same_shape(const Tensor& o) const { return shape == o.shape; }
  bool all_finite() const;
  double max_abs() const;

  static std::int64_t numel_of(const std::vector<std::int64_t>& s) {
    std::int64_t n = 1;
    for (auto d : s) {
      if (d < 0) throw std::invalid_argument("Tensor: negative dimension");
      n *= d;
    }
    return n;
  }
};

std::string shape_str(const std::vector<std::int64_t>& s);

/// Integer grid (class ids, visibility masks).
struct GridI {
  std::int64_t h = 0, w = 0;
  std::vector<std::int32_t> v;

  GridI() = default;
  GridI(std::int64_t h_, std::int64_t w_) : h(h_), w(w_), v(static_cast<std::size_t>(h_ * w_), 0) {}

  std::int32_t& at(std::int64_t r, std::int64_t c) { return v[static_cast<std::size_t>(r * w + c)]; }
  std::int32_t at(std::int64_t r, std::int64_t c) const { return v[static_cast<std::size_t>(r * w + c)]; }
  std::int64_t numel() const { return h * w; }
  bool operator==(const GridI& o) const { return h == o.h && w == o.w && v == o.v; }
};

}  // namespace hyperv2x
