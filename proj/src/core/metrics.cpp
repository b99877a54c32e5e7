#include "core/metrics.hpp"

#include <cmath>
#include <vector>

namespace udvd {

namespace {

// Y planes as doubles, border already shaved.
std::vector<double> luma_plane(const Tensor& img, int n, int border) {
  const int h = img.h() - 2 * border, w = img.w() - 2 * border;
  std::vector<double> y(static_cast<size_t>(h) * w);
  for (int i = 0; i < h; ++i)
    for (int j = 0; j < w; ++j) {
      double r = img.at(n, 0, i + border, j + border);
      double g = img.at(n, 1, i + border, j + border);
      double b = img.at(n, 2, i + border, j + border);
      y[static_cast<size_t>(i) * w + j] = 16.0 + 65.481 * r + 128.553 * g + 24.966 * b;
    }
  return y;
}

void check_pair(const Tensor& a, const Tensor& b, int border, int min_size) {
  if (!a.same_shape(b))
    fail_shape("metric: shapes differ, ", shape_str(a), " vs ", shape_str(b));
  if (a.c() != 3) fail_shape("metric: expected 3-channel RGB, got ", a.c(), " channels");
  if (border < 0) fail_param("metric: border must be >= 0, got ", border);
  if (a.h() - 2 * border < min_size || a.w() - 2 * border < min_size)
    fail_shape("metric: ", a.h(), "x", a.w(), " too small for border ", border);
}

}  // namespace

Tensor rgb_to_y(const Tensor& img) {
  if (img.c() != 3) fail_shape("rgb_to_y: expected 3 channels, got ", img.c());
  Tensor out(img.n(), 1, img.h(), img.w());
  for (int n = 0; n < img.n(); ++n) {
    std::vector<double> y = luma_plane(img, n, 0);
    for (size_t i = 0; i < y.size(); ++i) out[out.offset(n, 0, 0, 0) + i] = static_cast<float>(y[i]);
  }
  return out;
}

double psnr_y(const Tensor& a, const Tensor& b, int border) {
  check_pair(a, b, border, 1);
  double acc = 0.0;
  size_t count = 0;
  for (int n = 0; n < a.n(); ++n) {
    std::vector<double> ya = luma_plane(a, n, border);
    std::vector<double> yb = luma_plane(b, n, border);
    for (size_t i = 0; i < ya.size(); ++i) {
      double d = ya[i] - yb[i];
      acc += d * d;
    }
    count += ya.size();
  }
  double mse = acc / static_cast<double>(count);
  if (mse <= 0.0) return 99.0;
  return std::min(99.0, 10.0 * std::log10(255.0 * 255.0 / mse));
}

double ssim_y(const Tensor& a, const Tensor& b, int border) {
  constexpr int kWin = 11, kHalf = kWin / 2;
  constexpr double kC1 = (0.01 * 255.0) * (0.01 * 255.0);
  constexpr double kC2 = (0.03 * 255.0) * (0.03 * 255.0);
  check_pair(a, b, border, kWin);

  // 11x11 Gaussian window, sigma 1.5, normalized.
  double win[kWin][kWin];
  double wsum = 0.0;
  for (int i = 0; i < kWin; ++i)
    for (int j = 0; j < kWin; ++j) {
      double dy = i - kHalf, dx = j - kHalf;
      win[i][j] = std::exp(-(dx * dx + dy * dy) / (2.0 * 1.5 * 1.5));
      wsum += win[i][j];
    }
  for (int i = 0; i < kWin; ++i)
    for (int j = 0; j < kWin; ++j) win[i][j] /= wsum;

  const int h = a.h() - 2 * border, w = a.w() - 2 * border;
  double total = 0.0;
  size_t count = 0;
  for (int n = 0; n < a.n(); ++n) {
    std::vector<double> ya = luma_plane(a, n, border);
    std::vector<double> yb = luma_plane(b, n, border);
    for (int i = 0; i + kWin <= h; ++i)
      for (int j = 0; j + kWin <= w; ++j) {
        double mu1 = 0.0, mu2 = 0.0, s11 = 0.0, s22 = 0.0, s12 = 0.0;
        for (int u = 0; u < kWin; ++u)
          for (int v = 0; v < kWin; ++v) {
            double x = ya[static_cast<size_t>(i + u) * w + (j + v)];
            double y = yb[static_cast<size_t>(i + u) * w + (j + v)];
            double wt = win[u][v];
            mu1 += wt * x;
            mu2 += wt * y;
            s11 += wt * x * x;
            s22 += wt * y * y;
            s12 += wt * x * y;
          }
        double var1 = s11 - mu1 * mu1;
        double var2 = s22 - mu2 * mu2;
        double cov = s12 - mu1 * mu2;
        double l = (2.0 * mu1 * mu2 + kC1) / (mu1 * mu1 + mu2 * mu2 + kC1);
        double cs = (2.0 * cov + kC2) / (var1 + var2 + kC2);
        total += l * cs;
        ++count;
      }
  }
  return total / static_cast<double>(count);
}

}  // namespace udvd
