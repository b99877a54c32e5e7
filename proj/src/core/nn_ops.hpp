#pragma once
// Neural-net primitives on NCHW tensors (stride 1, zero padding).
//
// Every primitive has a direct-loop template implementation; the double
// instantiation is the 64-bit shadow used by gradient checks. conv2d also
// has a float fast path (im2col + Eigen matrix product) that must agree
// with the reference to 1e-5 — tests enforce this.

#include <utility>

#include "core/tensor.hpp"

namespace udvd {

// weight is (c_out, c_in, kh, kw); bias is (1, c_out, 1, 1).
template <typename T>
TensorT<T> conv2d_ref(const TensorT<T>& x, const TensorT<T>& weight, const TensorT<T>& bias,
                      int pad) {
  if (pad < 0) fail_param("conv2d: pad must be >= 0, got ", pad);
  int cout = weight.n(), cin = weight.c(), kh = weight.h(), kw = weight.w();
  if (x.c() != cin)
    fail_shape("conv2d: input has ", x.c(), " channels but weight expects ", cin);
  if (bias.n() != 1 || bias.c() != cout || bias.h() != 1 || bias.w() != 1)
    fail_shape("conv2d: bias must be (1,", cout, ",1,1)");
  int oh = x.h() + 2 * pad - kh + 1;
  int ow = x.w() + 2 * pad - kw + 1;
  if (oh <= 0 || ow <= 0)
    fail_shape("conv2d: kernel ", kh, "x", kw, " does not fit ", x.h(), "x", x.w(),
               " input with pad ", pad);
  TensorT<T> out(x.n(), cout, oh, ow);
  for (int n = 0; n < x.n(); ++n)
    for (int oc = 0; oc < cout; ++oc)
      for (int oi = 0; oi < oh; ++oi)
        for (int oj = 0; oj < ow; ++oj) {
          T acc = bias[static_cast<size_t>(oc)];
          for (int ic = 0; ic < cin; ++ic)
            for (int ki = 0; ki < kh; ++ki) {
              int ii = oi - pad + ki;
              if (ii < 0 || ii >= x.h()) continue;
              for (int kj = 0; kj < kw; ++kj) {
                int ij = oj - pad + kj;
                if (ij < 0 || ij >= x.w()) continue;
                acc += x.at(n, ic, ii, ij) * weight.at(oc, ic, ki, kj);
              }
            }
          out.at(n, oc, oi, oj) = acc;
        }
  return out;
}

// Fast float path; same contract as conv2d_ref.
Tensor conv2d(const Tensor& x, const Tensor& weight, const Tensor& bias, int pad);

struct Conv2dGrads {
  Tensor x, weight, bias;
};

// upstream is the gradient at the conv output.
Conv2dGrads conv2d_backward(const Tensor& upstream, const Tensor& x, const Tensor& weight,
                            int pad);

template <typename T>
TensorT<T> relu(const TensorT<T>& x) {
  TensorT<T> out = x;
  for (size_t i = 0; i < out.numel(); ++i)
    if (out[i] < T(0)) out[i] = T(0);
  return out;
}

// Subgradient at 0 is taken as 0.
Tensor relu_backward(const Tensor& upstream, const Tensor& x);

// out(n, c, r*i + a, r*j + b) = x(n, c*r*r + a*r + b, i, j)
template <typename T>
TensorT<T> pixel_shuffle(const TensorT<T>& x, int r) {
  if (r < 1) fail_param("pixel_shuffle: r must be >= 1, got ", r);
  if (x.c() % (r * r) != 0)
    fail_shape("pixel_shuffle: ", x.c(), " channels not divisible by r^2=", r * r);
  int co = x.c() / (r * r);
  TensorT<T> out(x.n(), co, x.h() * r, x.w() * r);
  for (int n = 0; n < x.n(); ++n)
    for (int c = 0; c < co; ++c)
      for (int a = 0; a < r; ++a)
        for (int b = 0; b < r; ++b)
          for (int i = 0; i < x.h(); ++i)
            for (int j = 0; j < x.w(); ++j)
              out.at(n, c, r * i + a, r * j + b) = x.at(n, c * r * r + a * r + b, i, j);
  return out;
}

// Exact inverse of pixel_shuffle (and its adjoint, so it backs the
// shuffle backward pass).
template <typename T>
TensorT<T> pixel_unshuffle(const TensorT<T>& x, int r) {
  if (r < 1) fail_param("pixel_unshuffle: r must be >= 1, got ", r);
  if (x.h() % r != 0 || x.w() % r != 0)
    fail_shape("pixel_unshuffle: ", x.h(), "x", x.w(), " not divisible by r=", r);
  int hi = x.h() / r, wi = x.w() / r;
  TensorT<T> out(x.n(), x.c() * r * r, hi, wi);
  for (int n = 0; n < x.n(); ++n)
    for (int c = 0; c < x.c(); ++c)
      for (int a = 0; a < r; ++a)
        for (int b = 0; b < r; ++b)
          for (int i = 0; i < hi; ++i)
            for (int j = 0; j < wi; ++j)
              out.at(n, c * r * r + a * r + b, i, j) = x.at(n, c, r * i + a, r * j + b);
  return out;
}

template <typename T>
TensorT<T> concat_channels(const TensorT<T>& a, const TensorT<T>& b) {
  if (a.n() != b.n() || a.h() != b.h() || a.w() != b.w())
    fail_shape("concat: batch/spatial dims differ");
  TensorT<T> out(a.n(), a.c() + b.c(), a.h(), a.w());
  size_t plane_a = static_cast<size_t>(a.c()) * a.h() * a.w();
  size_t plane_b = static_cast<size_t>(b.c()) * b.h() * b.w();
  for (int n = 0; n < a.n(); ++n) {
    std::copy(a.data() + n * plane_a, a.data() + (n + 1) * plane_a,
              out.data() + n * (plane_a + plane_b));
    std::copy(b.data() + n * plane_b, b.data() + (n + 1) * plane_b,
              out.data() + n * (plane_a + plane_b) + plane_a);
  }
  return out;
}

// Splits the upstream gradient back into the two concat inputs; c_a is the
// channel count of the first input.
std::pair<Tensor, Tensor> concat_backward(const Tensor& upstream, int c_a);

template <typename T>
TensorT<T> add(const TensorT<T>& a, const TensorT<T>& b) {
  if (!a.same_shape(b)) fail_shape("add: shapes differ");
  TensorT<T> out = a;
  for (size_t i = 0; i < out.numel(); ++i) out[i] += b[i];
  return out;
}

// Mean squared difference; accumulates in double regardless of T.
template <typename T>
T l2_loss(const TensorT<T>& pred, const TensorT<T>& target) {
  if (!pred.same_shape(target)) fail_shape("l2_loss: shapes differ");
  if (pred.empty()) fail_shape("l2_loss: empty input");
  double acc = 0.0;
  for (size_t i = 0; i < pred.numel(); ++i) {
    double d = static_cast<double>(pred[i]) - static_cast<double>(target[i]);
    acc += d * d;
  }
  return static_cast<T>(acc / static_cast<double>(pred.numel()));
}

Tensor l2_loss_backward(float upstream, const Tensor& pred, const Tensor& target);

}  // namespace udvd
