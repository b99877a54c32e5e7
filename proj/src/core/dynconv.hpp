#pragma once
// Per-pixel dynamic convolution. Each output location is produced by its
// own k x k kernel (zero padding, k odd); the upsampling form emits an
// r x r block of HR pixels per LR location from r*r kernel groups.
//
//   out(n,c, i*r+x, j*r+y) = sum_{u,v in [-D,D]} K^{x,y}_{n,i,j}(u,v) * in(n,c, i-u, j-v)
//
// with D = k/2. Kernels are stored as NCHW tensors over the LR grid; the
// channel index encodes (x, y, u, v):
//
//   shared over input channels:  (x*r + y)*k*k + (u+D)*k + (v+D)
//   per input channel (r == 1):  c*k*k + (u+D)*k + (v+D)
//
// The reference implementation is the slow literal transcription; the fast
// path streams whole kernel planes and must agree to 1e-5.

#include "core/tensor.hpp"

namespace udvd {

struct PerPixelKernels {
  Tensor values;
  int k = 3;
  int r = 1;
  bool channel_shared = true;
};

// Kernel channel count required for the given geometry.
int kernel_plane_count(int k, int r, bool channel_shared, int input_channels);

// Raises Param/Shape errors when the kernel tensor does not match the input.
void validate_kernels(const PerPixelKernels& kp, const Tensor& input);

template <typename T>
TensorT<T> dynamic_conv_ref(const TensorT<T>& input, const TensorT<T>& kernels, int k, int r,
                            bool channel_shared) {
  int d = k / 2;
  TensorT<T> out(input.n(), input.c(), input.h() * r, input.w() * r);
  for (int n = 0; n < input.n(); ++n)
    for (int c = 0; c < input.c(); ++c)
      for (int i = 0; i < input.h(); ++i)
        for (int j = 0; j < input.w(); ++j)
          for (int x = 0; x < r; ++x)
            for (int y = 0; y < r; ++y) {
              T acc = T(0);
              for (int u = -d; u <= d; ++u) {
                int ii = i - u;
                if (ii < 0 || ii >= input.h()) continue;
                for (int v = -d; v <= d; ++v) {
                  int jj = j - v;
                  if (jj < 0 || jj >= input.w()) continue;
                  int plane = channel_shared ? (x * r + y) * k * k + (u + d) * k + (v + d)
                                             : c * k * k + (u + d) * k + (v + d);
                  acc += kernels.at(n, plane, i, j) * input.at(n, c, ii, jj);
                }
              }
              out.at(n, c, i * r + x, j * r + y) = acc;
            }
  return out;
}

// Same-resolution form; kernels must have r == 1.
Tensor dynamic_conv(const Tensor& input, const PerPixelKernels& kernels);

// Upsampling form; accepts any r >= 1 and reduces to dynamic_conv at r == 1.
Tensor dynamic_conv_upsample(const Tensor& input, const PerPixelKernels& kernels);

struct DynConvGrads {
  Tensor input, kernels;
};

DynConvGrads dynamic_conv_backward(const Tensor& upstream, const Tensor& input,
                                   const PerPixelKernels& kernels);

}  // namespace udvd
