#pragma once
// HR -> LR degradation synthesis: isotropic Gaussian blur, bicubic
// downscaling, then additive white Gaussian noise. The spatially varying
// form ramps blur width and noise level linearly across image columns;
// the uniform form is the same code path with constant ramps, so collapsed
// ranges produce bitwise-identical output.
//
// Images are NCHW float tensors with RGB in [0,1]; sigma is expressed in
// 8-bit units (applied as sigma/255). Noise is never clipped here — only
// 8-bit export quantizes.

#include <cstdint>
#include <vector>

#include "core/tensor.hpp"

namespace udvd {

// Normalized isotropic Gaussian as a (1,1,size,size) tensor; size odd.
Tensor gaussian_kernel(double eps, int size = 15);

// Direct 2D correlation with replicate (edge-clamp) padding, per channel.
Tensor blur(const Tensor& img, const Tensor& kernel);

inline double cubic_weight(double x) {
  // Keys kernel, a = -0.5.
  x = std::abs(x);
  if (x <= 1.0) return (1.5 * x - 2.5) * x * x + 1.0;
  if (x < 2.0) return ((-0.5 * x + 2.5) * x - 4.0) * x + 2.0;
  return 0.0;
}

// Separable bicubic resampling. Output pixel centers map to input
// coordinates u = (i+0.5)/scale - 0.5; when antialias is on and the axis
// shrinks, the kernel support widens by 1/scale. Tap weights are
// renormalized and edge taps clamp. Height is resampled first.
template <typename T>
TensorT<T> bicubic_resize(const TensorT<T>& img, int oh, int ow, bool antialias = true) {
  if (img.empty()) fail_shape("bicubic_resize: empty input");
  if (oh < 1 || ow < 1) fail_shape("bicubic_resize: output size must be positive, got ", oh, "x",
                                   ow);

  struct Axis {
    std::vector<int> lo;         // first tap index per output position
    std::vector<double> wts;     // taps-per-out weights, row-major
    int taps = 0;
  };
  auto plan = [](int in, int out, bool aa) {
    Axis ax;
    double scale = static_cast<double>(out) / in;
    double kscale = (aa && scale < 1.0) ? scale : 1.0;
    double radius = 2.0 / kscale;
    ax.taps = static_cast<int>(std::floor(2.0 * radius)) + 2;
    ax.lo.resize(out);
    ax.wts.assign(static_cast<size_t>(out) * ax.taps, 0.0);
    for (int i = 0; i < out; ++i) {
      double u = (i + 0.5) / scale - 0.5;
      int lo = static_cast<int>(std::ceil(u - radius));
      ax.lo[i] = lo;
      double sum = 0.0;
      for (int t = 0; t < ax.taps; ++t) sum += cubic_weight((u - (lo + t)) * kscale);
      for (int t = 0; t < ax.taps; ++t)
        ax.wts[static_cast<size_t>(i) * ax.taps + t] = cubic_weight((u - (lo + t)) * kscale) / sum;
    }
    return ax;
  };

  Axis va = plan(img.h(), oh, antialias);
  TensorT<T> mid(img.n(), img.c(), oh, img.w());
  for (int n = 0; n < img.n(); ++n)
    for (int c = 0; c < img.c(); ++c)
      for (int i = 0; i < oh; ++i)
        for (int j = 0; j < img.w(); ++j) {
          double acc = 0.0;
          for (int t = 0; t < va.taps; ++t) {
            int src = std::clamp(va.lo[i] + t, 0, img.h() - 1);
            acc += va.wts[static_cast<size_t>(i) * va.taps + t] * img.at(n, c, src, j);
          }
          mid.at(n, c, i, j) = static_cast<T>(acc);
        }

  Axis ha = plan(img.w(), ow, antialias);
  TensorT<T> out(img.n(), img.c(), oh, ow);
  for (int n = 0; n < img.n(); ++n)
    for (int c = 0; c < img.c(); ++c)
      for (int i = 0; i < oh; ++i)
        for (int j = 0; j < ow; ++j) {
          double acc = 0.0;
          for (int t = 0; t < ha.taps; ++t) {
            int src = std::clamp(ha.lo[j] + t, 0, img.w() - 1);
            acc += ha.wts[static_cast<size_t>(j) * ha.taps + t] * mid.at(n, c, i, src);
          }
          out.at(n, c, i, j) = static_cast<T>(acc);
        }
  return out;
}

// img + (sigma/255) * n, with n(i) the standard normal draw at the flat
// element index under the given stream key.
Tensor add_awgn(const Tensor& img, double sigma, uint64_t key);

struct DegradationParams {
  double eps = 1.3;    // Gaussian blur width, [0.2, 3.0]
  double sigma = 15.0; // noise level in 8-bit units, [0, 75]
  int scale = 3;       // downscale factor, one of {2, 3, 4}
  uint64_t seed = 0;   // noise stream seed
};

void validate(const DegradationParams& p);

// Blur width / noise level ramping linearly from the left LR column
// (eps0, sigma0) to the right LR column (eps1, sigma1).
struct SpatialDegradation {
  double eps0 = 0.2, eps1 = 3.0;
  double sigma0 = 0.0, sigma1 = 75.0;
  int scale = 3;
  uint64_t seed = 0;
};

void validate(const SpatialDegradation& p);

// Per-LR-column parameter values for the given LR width.
std::vector<double> column_ramp(double v0, double v1, int lr_w);

// HR dims must be multiples of scale. The kernel size is always 15.
Tensor degrade(const Tensor& hr, const DegradationParams& p);
Tensor degrade_spatial(const Tensor& hr, const SpatialDegradation& p);

}  // namespace udvd
