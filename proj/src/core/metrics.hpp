#pragma once
// Luma-channel image quality metrics. RGB in [0,1] converts to 8-bit luma
// Y = 16 + 65.481 R + 128.553 G + 24.966 B (BT.601); both metrics run on Y
// in double precision. An optional border is shaved from every side first.

#include "core/tensor.hpp"

namespace udvd {

// (n,1,h,w) luma tensor from a (n,3,h,w) RGB tensor.
Tensor rgb_to_y(const Tensor& img);

// 10*log10(255^2 / MSE_Y), capped at 99 dB so identical images compare
// cleanly.
double psnr_y(const Tensor& a, const Tensor& b, int border = 0);

// Mean SSIM over fully interior 11x11 Gaussian windows (sigma 1.5,
// C1=(0.01*255)^2, C2=(0.03*255)^2).
double ssim_y(const Tensor& a, const Tensor& b, int border = 0);

}  // namespace udvd
