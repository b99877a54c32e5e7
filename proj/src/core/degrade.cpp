#include "core/degrade.hpp"

#include <algorithm>
#include <cmath>

#include "core/rng.hpp"

namespace udvd {

namespace {

constexpr uint64_t kAwgnTag = 0x6177676eull;  // keeps noise streams distinct per use

void check_kernel(const Tensor& kernel) {
  if (kernel.n() != 1 || kernel.c() != 1 || kernel.h() != kernel.w() || kernel.h() % 2 == 0)
    fail_shape("blur: kernel must be (1,1,s,s) with s odd, got ", shape_str(kernel));
}

// Correlation with a per-column kernel choice; col_kernel[x] indexes
// kernels for output column x. Replicate padding.
Tensor blur_mapped(const Tensor& img, const std::vector<Tensor>& kernels,
                   const std::vector<int>& col_kernel) {
  if (img.empty()) fail_shape("blur: empty image");
  for (const Tensor& k : kernels) check_kernel(k);
  const int s = kernels.front().h(), d = s / 2;
  Tensor out(img.n(), img.c(), img.h(), img.w());
  for (int n = 0; n < img.n(); ++n)
    for (int c = 0; c < img.c(); ++c)
      for (int y = 0; y < img.h(); ++y)
        for (int x = 0; x < img.w(); ++x) {
          const Tensor& k = kernels[static_cast<size_t>(col_kernel[x])];
          double acc = 0.0;
          for (int dy = -d; dy <= d; ++dy) {
            int yy = std::clamp(y + dy, 0, img.h() - 1);
            for (int dx = -d; dx <= d; ++dx) {
              int xx = std::clamp(x + dx, 0, img.w() - 1);
              acc += static_cast<double>(k.at(0, 0, dy + d, dx + d)) * img.at(n, c, yy, xx);
            }
          }
          out.at(n, c, y, x) = static_cast<float>(acc);
        }
  return out;
}

// img + (sigmas[x]/255) * normal(flat index).
Tensor awgn_columns(const Tensor& img, const std::vector<double>& sigmas, uint64_t key) {
  CounterRng rng(key);
  Tensor out = img;
  size_t flat = 0;
  for (int n = 0; n < img.n(); ++n)
    for (int c = 0; c < img.c(); ++c)
      for (int y = 0; y < img.h(); ++y)
        for (int x = 0; x < img.w(); ++x, ++flat)
          out[flat] = img[flat] +
                      static_cast<float>(sigmas[static_cast<size_t>(x)] / 255.0 * rng.normal(flat));
  return out;
}

Tensor degrade_columns(const Tensor& hr, const std::vector<double>& eps_cols,
                       const std::vector<double>& sigma_cols, int scale, uint64_t seed) {
  if (hr.empty()) fail_shape("degrade: empty image");
  if (hr.h() % scale != 0 || hr.w() % scale != 0)
    fail_shape("degrade: HR dims ", hr.h(), "x", hr.w(), " are not multiples of scale ", scale);
  const int lw = hr.w() / scale, lh = hr.h() / scale;
  if (lw < 1 || lh < 1) fail_shape("degrade: image smaller than one LR pixel");

  std::vector<Tensor> kernels;
  kernels.reserve(eps_cols.size());
  for (double e : eps_cols) kernels.push_back(gaussian_kernel(e, 15));
  std::vector<int> col_kernel(static_cast<size_t>(hr.w()));
  for (int x = 0; x < hr.w(); ++x) col_kernel[static_cast<size_t>(x)] = x / scale;

  Tensor blurred = blur_mapped(hr, kernels, col_kernel);
  Tensor lr = bicubic_resize(blurred, lh, lw, true);
  return awgn_columns(lr, sigma_cols, rng_key({kAwgnTag, seed}));
}

}  // namespace

Tensor gaussian_kernel(double eps, int size) {
  if (!(eps > 0.0)) fail_param("gaussian_kernel: width must be positive, got ", eps);
  if (size < 1 || size % 2 == 0) fail_param("gaussian_kernel: size must be odd, got ", size);
  Tensor k(1, 1, size, size);
  const int d = size / 2;
  double sum = 0.0;
  std::vector<double> vals(static_cast<size_t>(size) * size);
  for (int i = 0; i < size; ++i)
    for (int j = 0; j < size; ++j) {
      double dy = i - d, dx = j - d;
      double v = std::exp(-(dx * dx + dy * dy) / (2.0 * eps * eps));
      vals[static_cast<size_t>(i) * size + j] = v;
      sum += v;
    }
  for (size_t i = 0; i < vals.size(); ++i) k[i] = static_cast<float>(vals[i] / sum);
  return k;
}

Tensor blur(const Tensor& img, const Tensor& kernel) {
  std::vector<Tensor> kernels{kernel};
  std::vector<int> col_kernel(static_cast<size_t>(img.w()), 0);
  return blur_mapped(img, kernels, col_kernel);
}

Tensor add_awgn(const Tensor& img, double sigma, uint64_t key) {
  if (sigma < 0.0) fail_param("add_awgn: sigma must be >= 0, got ", sigma);
  return awgn_columns(img, std::vector<double>(static_cast<size_t>(img.w()), sigma), key);
}

void validate(const DegradationParams& p) {
  if (p.eps < 0.2 || p.eps > 3.0)
    fail_param("degrade: blur width must lie in [0.2, 3.0], got ", p.eps);
  if (p.sigma < 0.0 || p.sigma > 75.0)
    fail_param("degrade: noise level must lie in [0, 75], got ", p.sigma);
  if (p.scale < 2 || p.scale > 4)
    fail_param("degrade: scale must be 2, 3 or 4, got ", p.scale);
}

void validate(const SpatialDegradation& p) {
  validate(DegradationParams{p.eps0, p.sigma0, p.scale, p.seed});
  validate(DegradationParams{p.eps1, p.sigma1, p.scale, p.seed});
}

std::vector<double> column_ramp(double v0, double v1, int lr_w) {
  std::vector<double> vals(static_cast<size_t>(lr_w), v0);
  for (int j = 1; j < lr_w; ++j)
    vals[static_cast<size_t>(j)] = v0 + (v1 - v0) * (static_cast<double>(j) / (lr_w - 1));
  return vals;
}

Tensor degrade(const Tensor& hr, const DegradationParams& p) {
  validate(p);
  if (hr.w() % p.scale != 0)
    fail_shape("degrade: HR width ", hr.w(), " is not a multiple of scale ", p.scale);
  const int lw = hr.w() / p.scale;
  return degrade_columns(hr, column_ramp(p.eps, p.eps, lw), column_ramp(p.sigma, p.sigma, lw),
                         p.scale, p.seed);
}

Tensor degrade_spatial(const Tensor& hr, const SpatialDegradation& p) {
  validate(p);
  if (hr.w() % p.scale != 0)
    fail_shape("degrade: HR width ", hr.w(), " is not a multiple of scale ", p.scale);
  const int lw = hr.w() / p.scale;
  return degrade_columns(hr, column_ramp(p.eps0, p.eps1, lw), column_ramp(p.sigma0, p.sigma1, lw),
                         p.scale, p.seed);
}

}  // namespace udvd
