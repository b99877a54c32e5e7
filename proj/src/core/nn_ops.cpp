#include "core/nn_ops.hpp"

#include <Eigen/Dense>

namespace udvd {

namespace {

using MatF = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapF = Eigen::Map<MatF>;
using CMapF = Eigen::Map<const MatF>;

// Expands one sample into a (cin*kh*kw) x (oh*ow) patch matrix with zero
// padding, copying contiguous input row spans where possible.
void im2col(const float* x, int cin, int h, int w, int kh, int kw, int pad, int oh, int ow,
            float* cols) {
  for (int ic = 0; ic < cin; ++ic) {
    const float* chan = x + static_cast<size_t>(ic) * h * w;
    for (int ki = 0; ki < kh; ++ki) {
      for (int kj = 0; kj < kw; ++kj) {
        float* row = cols + (static_cast<size_t>(ic) * kh * kw + ki * kw + kj) *
                                (static_cast<size_t>(oh) * ow);
        for (int oi = 0; oi < oh; ++oi) {
          float* dst = row + static_cast<size_t>(oi) * ow;
          int ii = oi - pad + ki;
          if (ii < 0 || ii >= h) {
            std::fill(dst, dst + ow, 0.0f);
            continue;
          }
          int j0 = std::max(0, pad - kj);
          int j1 = std::min(ow, w + pad - kj);
          std::fill(dst, dst + j0, 0.0f);
          if (j1 > j0)
            std::copy(chan + ii * w + (j0 - pad + kj), chan + ii * w + (j1 - pad + kj), dst + j0);
          std::fill(dst + std::max(j0, j1), dst + ow, 0.0f);
        }
      }
    }
  }
}

// Adjoint of im2col: scatter-adds the patch matrix back onto the input grid.
void col2im_add(const float* cols, int cin, int h, int w, int kh, int kw, int pad, int oh, int ow,
                float* x) {
  for (int ic = 0; ic < cin; ++ic) {
    float* chan = x + static_cast<size_t>(ic) * h * w;
    for (int ki = 0; ki < kh; ++ki) {
      for (int kj = 0; kj < kw; ++kj) {
        const float* row = cols + (static_cast<size_t>(ic) * kh * kw + ki * kw + kj) *
                                      (static_cast<size_t>(oh) * ow);
        for (int oi = 0; oi < oh; ++oi) {
          int ii = oi - pad + ki;
          if (ii < 0 || ii >= h) continue;
          const float* src = row + static_cast<size_t>(oi) * ow;
          int j0 = std::max(0, pad - kj);
          int j1 = std::min(ow, w + pad - kj);
          float* dst = chan + ii * w + (j0 - pad + kj);
          for (int j = j0; j < j1; ++j) *dst++ += src[j];
        }
      }
    }
  }
}

}  // namespace

Tensor conv2d(const Tensor& x, const Tensor& weight, const Tensor& bias, int pad) {
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

  Tensor out(x.n(), cout, oh, ow);
  Eigen::Index krows = static_cast<Eigen::Index>(cin) * kh * kw;
  Eigen::Index cols_n = static_cast<Eigen::Index>(oh) * ow;
  MatF cols(krows, cols_n);
  CMapF wm(weight.data(), cout, krows);
  for (int n = 0; n < x.n(); ++n) {
    im2col(x.data() + x.offset(n, 0, 0, 0), cin, x.h(), x.w(), kh, kw, pad, oh, ow, cols.data());
    MapF om(out.data() + out.offset(n, 0, 0, 0), cout, cols_n);
    om.noalias() = wm * cols;
    for (int oc = 0; oc < cout; ++oc) om.row(oc).array() += bias[static_cast<size_t>(oc)];
  }
  return out;
}

Conv2dGrads conv2d_backward(const Tensor& upstream, const Tensor& x, const Tensor& weight,
                            int pad) {
  int cout = weight.n(), cin = weight.c(), kh = weight.h(), kw = weight.w();
  int oh = x.h() + 2 * pad - kh + 1;
  int ow = x.w() + 2 * pad - kw + 1;
  if (upstream.n() != x.n() || upstream.c() != cout || upstream.h() != oh || upstream.w() != ow)
    fail_shape("conv2d_backward: upstream shape ", shape_str(upstream), " does not match output");

  Conv2dGrads g{Tensor(x.n(), x.c(), x.h(), x.w()), Tensor(cout, cin, kh, kw),
                Tensor(1, cout, 1, 1)};
  Eigen::Index krows = static_cast<Eigen::Index>(cin) * kh * kw;
  Eigen::Index cols_n = static_cast<Eigen::Index>(oh) * ow;
  MatF cols(krows, cols_n);
  MatF colgrad(krows, cols_n);
  CMapF wm(weight.data(), cout, krows);
  MapF gwm(g.weight.data(), cout, krows);
  for (int n = 0; n < x.n(); ++n) {
    CMapF um(upstream.data() + upstream.offset(n, 0, 0, 0), cout, cols_n);
    im2col(x.data() + x.offset(n, 0, 0, 0), cin, x.h(), x.w(), kh, kw, pad, oh, ow, cols.data());
    gwm.noalias() += um * cols.transpose();
    // Fixed-order accumulation: an Eigen redux over this map would peel scalar
    // elements until the heap pointer is SIMD-aligned, making the summation
    // order (and hence rounding) depend on where the buffer happened to land.
    for (int oc = 0; oc < cout; ++oc) {
      const float* row = upstream.data() + upstream.offset(n, oc, 0, 0);
      float s = 0.0f;
      for (Eigen::Index j = 0; j < cols_n; ++j) s += row[j];
      g.bias[static_cast<size_t>(oc)] += s;
    }
    colgrad.noalias() = wm.transpose() * um;
    col2im_add(colgrad.data(), cin, x.h(), x.w(), kh, kw, pad, oh, ow,
               g.x.data() + g.x.offset(n, 0, 0, 0));
  }
  return g;
}

Tensor relu_backward(const Tensor& upstream, const Tensor& x) {
  if (!upstream.same_shape(x)) fail_shape("relu_backward: shapes differ");
  Tensor g(x.n(), x.c(), x.h(), x.w());
  for (size_t i = 0; i < x.numel(); ++i) g[i] = x[i] > 0.0f ? upstream[i] : 0.0f;
  return g;
}

std::pair<Tensor, Tensor> concat_backward(const Tensor& upstream, int c_a) {
  if (c_a < 0 || c_a > upstream.c())
    fail_shape("concat_backward: first input had ", c_a, " channels but upstream has ",
               upstream.c());
  int c_b = upstream.c() - c_a;
  Tensor ga(upstream.n(), c_a, upstream.h(), upstream.w());
  Tensor gb(upstream.n(), c_b, upstream.h(), upstream.w());
  size_t plane_a = static_cast<size_t>(c_a) * upstream.h() * upstream.w();
  size_t plane_b = static_cast<size_t>(c_b) * upstream.h() * upstream.w();
  for (int n = 0; n < upstream.n(); ++n) {
    const float* src = upstream.data() + n * (plane_a + plane_b);
    std::copy(src, src + plane_a, ga.data() + n * plane_a);
    std::copy(src + plane_a, src + plane_a + plane_b, gb.data() + n * plane_b);
  }
  return {std::move(ga), std::move(gb)};
}

Tensor l2_loss_backward(float upstream, const Tensor& pred, const Tensor& target) {
  if (!pred.same_shape(target)) fail_shape("l2_loss_backward: shapes differ");
  Tensor g(pred.n(), pred.c(), pred.h(), pred.w());
  float scale = 2.0f * upstream / static_cast<float>(pred.numel());
  for (size_t i = 0; i < pred.numel(); ++i) g[i] = scale * (pred[i] - target[i]);
  return g;
}

}  // namespace udvd
