#include "core/dynconv.hpp"

#include <algorithm>

namespace udvd {

int kernel_plane_count(int k, int r, bool channel_shared, int input_channels) {
  return channel_shared ? k * k * r * r : input_channels * k * k;
}

void validate_kernels(const PerPixelKernels& kp, const Tensor& input) {
  if (kp.k < 1 || kp.k % 2 == 0) fail_param("dynamic conv: k must be odd and >= 1, got ", kp.k);
  if (kp.r < 1) fail_param("dynamic conv: r must be >= 1, got ", kp.r);
  if (!kp.channel_shared && kp.r != 1)
    fail_param("dynamic conv: per-channel kernels are only defined for r == 1");
  if (input.empty()) fail_shape("dynamic conv: empty input");
  if (kp.values.n() != input.n() || kp.values.h() != input.h() || kp.values.w() != input.w())
    fail_shape("dynamic conv: kernel grid ", shape_str(kp.values),
               " does not cover input ", shape_str(input));
  int want = kernel_plane_count(kp.k, kp.r, kp.channel_shared, input.c());
  if (kp.values.c() != want)
    fail_shape("dynamic conv: expected ", want, " kernel channels, got ", kp.values.c());
}

namespace {

// Enumerates kernel planes as (plane, x, y, u, v, channel range) and streams
// each one across the image with contiguous reads.
Tensor dyn_conv_fast(const Tensor& input, const PerPixelKernels& kp) {
  validate_kernels(kp, input);
  const int k = kp.k, r = kp.r, d = k / 2;
  const int h = input.h(), w = input.w(), wo = w * r;
  Tensor out(input.n(), input.c(), h * r, wo);
  const int planes = kp.values.c();
  for (int n = 0; n < input.n(); ++n) {
    for (int p = 0; p < planes; ++p) {
      int x = 0, y = 0, cq = p / (k * k);
      int uv = p % (k * k);
      if (kp.channel_shared) {
        x = cq / r;
        y = cq % r;
      }
      const int u = uv / k - d, v = uv % k - d;
      const int c0 = kp.channel_shared ? 0 : cq;
      const int c1 = kp.channel_shared ? input.c() : cq + 1;
      const float* kern = kp.values.data() + kp.values.offset(n, p, 0, 0);
      const int i0 = std::max(0, u), i1 = std::min(h, h + u);
      const int j0 = std::max(0, v), j1 = std::min(w, w + v);
      for (int c = c0; c < c1; ++c) {
        const float* in_ch = input.data() + input.offset(n, c, 0, 0);
        float* out_ch = out.data() + out.offset(n, c, 0, 0);
        for (int i = i0; i < i1; ++i) {
          const float* krow = kern + static_cast<size_t>(i) * w;
          const float* irow = in_ch + static_cast<size_t>(i - u) * w - v;
          float* orow = out_ch + static_cast<size_t>(i * r + x) * wo + y;
          if (r == 1) {
            for (int j = j0; j < j1; ++j) orow[j] += krow[j] * irow[j];
          } else {
            for (int j = j0; j < j1; ++j) orow[static_cast<size_t>(j) * r] += krow[j] * irow[j];
          }
        }
      }
    }
  }
  return out;
}

}  // namespace

Tensor dynamic_conv(const Tensor& input, const PerPixelKernels& kernels) {
  if (kernels.r != 1)
    fail_param("dynamic_conv: same-resolution form requires r == 1, got r=", kernels.r);
  return dyn_conv_fast(input, kernels);
}

Tensor dynamic_conv_upsample(const Tensor& input, const PerPixelKernels& kernels) {
  return dyn_conv_fast(input, kernels);
}

DynConvGrads dynamic_conv_backward(const Tensor& upstream, const Tensor& input,
                                   const PerPixelKernels& kp) {
  validate_kernels(kp, input);
  const int k = kp.k, r = kp.r, d = k / 2;
  const int h = input.h(), w = input.w(), wo = w * r;
  if (upstream.n() != input.n() || upstream.c() != input.c() || upstream.h() != h * r ||
      upstream.w() != wo)
    fail_shape("dynamic_conv_backward: upstream shape ", shape_str(upstream),
               " does not match output");

  DynConvGrads g{Tensor(input.n(), input.c(), h, w),
                 Tensor(kp.values.n(), kp.values.c(), kp.values.h(), kp.values.w())};
  const int planes = kp.values.c();
  for (int n = 0; n < input.n(); ++n) {
    for (int p = 0; p < planes; ++p) {
      int x = 0, y = 0, cq = p / (k * k);
      int uv = p % (k * k);
      if (kp.channel_shared) {
        x = cq / r;
        y = cq % r;
      }
      const int u = uv / k - d, v = uv % k - d;
      const int c0 = kp.channel_shared ? 0 : cq;
      const int c1 = kp.channel_shared ? input.c() : cq + 1;
      const float* kern = kp.values.data() + kp.values.offset(n, p, 0, 0);
      float* gkern = g.kernels.data() + g.kernels.offset(n, p, 0, 0);
      const int i0 = std::max(0, u), i1 = std::min(h, h + u);
      const int j0 = std::max(0, v), j1 = std::min(w, w + v);
      for (int c = c0; c < c1; ++c) {
        const float* in_ch = input.data() + input.offset(n, c, 0, 0);
        float* gin_ch = g.input.data() + g.input.offset(n, c, 0, 0);
        const float* up_ch = upstream.data() + upstream.offset(n, c, 0, 0);
        for (int i = i0; i < i1; ++i) {
          const float* krow = kern + static_cast<size_t>(i) * w;
          float* gkrow = gkern + static_cast<size_t>(i) * w;
          const float* irow = in_ch + static_cast<size_t>(i - u) * w - v;
          float* girow = gin_ch + static_cast<size_t>(i - u) * w - v;
          const float* urow = up_ch + static_cast<size_t>(i * r + x) * wo + y;
          for (int j = j0; j < j1; ++j) {
            float up_v = urow[static_cast<size_t>(j) * r];
            gkrow[j] += up_v * irow[j];
            girow[j] += krow[j] * up_v;
          }
        }
      }
    }
  }
  return g;
}

}  // namespace udvd
