#pragma once
// Dense NCHW tensor. float is the production element type; the double
// instantiation backs the 64-bit shadow used by finite-difference checks.

#include <array>
#include <cassert>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "core/error.hpp"

namespace udvd {

template <typename T>
class TensorT {
 public:
  TensorT() = default;

  TensorT(int n, int c, int h, int w) : n_(n), c_(c), h_(h), w_(w) {
    if (n < 0 || c < 0 || h < 0 || w < 0)
      fail_shape("tensor dims must be non-negative, got (", n, ",", c, ",", h, ",", w, ")");
    data_.assign(static_cast<size_t>(n) * c * h * w, T(0));
  }

  static TensorT filled(int n, int c, int h, int w, T v) {
    TensorT t(n, c, h, w);
    for (T& x : t.data_) x = v;
    return t;
  }

  // Scalar carrier (1,1,1,1); used for loss values.
  static TensorT scalar(T v) { return filled(1, 1, 1, 1, v); }

  int n() const { return n_; }
  int c() const { return c_; }
  int h() const { return h_; }
  int w() const { return w_; }
  std::array<int, 4> shape() const { return {n_, c_, h_, w_}; }
  size_t numel() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }
  const std::vector<T>& values() const { return data_; }

  T& operator[](size_t i) { return data_[i]; }
  const T& operator[](size_t i) const { return data_[i]; }

  T& at(int n, int c, int h, int w) { return data_[offset(n, c, h, w)]; }
  const T& at(int n, int c, int h, int w) const { return data_[offset(n, c, h, w)]; }

  size_t offset(int n, int c, int h, int w) const {
    assert(n >= 0 && n < n_ && c >= 0 && c < c_ && h >= 0 && h < h_ && w >= 0 && w < w_);
    return ((static_cast<size_t>(n) * c_ + c) * h_ + h) * w_ + w;
  }

  bool same_shape(const TensorT& o) const {
    return n_ == o.n_ && c_ == o.c_ && h_ == o.h_ && w_ == o.w_;
  }

  template <typename U>
  TensorT<U> cast() const {
    TensorT<U> out(n_, c_, h_, w_);
    for (size_t i = 0; i < data_.size(); ++i) out[i] = static_cast<U>(data_[i]);
    return out;
  }

  bool all_finite() const {
    for (T v : data_)
      if (!std::isfinite(v)) return false;
    return true;
  }

 private:
  int n_ = 0, c_ = 0, h_ = 0, w_ = 0;
  std::vector<T> data_;
};

using Tensor = TensorT<float>;
using TensorD = TensorT<double>;

template <typename T>
std::string shape_str(const TensorT<T>& t) {
  return detail::cat("(", t.n(), ",", t.c(), ",", t.h(), ",", t.w(), ")");
}

}  // namespace udvd
