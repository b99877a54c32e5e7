#pragma once
// Procedural RGB test images: a smooth gradient background layered with
// oriented sinusoids and soft-edged disks and rectangles. Deterministic in
// the seed, values in [0,1]. Stands in for a photo corpus in tests and in
// self-contained training runs.

#include <algorithm>
#include <cmath>

#include "core/error.hpp"
#include "core/rng.hpp"
#include "core/tensor.hpp"

namespace udvd {

inline Tensor synth_image(uint64_t seed, int h, int w) {
  if (h < 1 || w < 1) fail_shape("synth_image: size must be positive, got ", h, "x", w);
  CounterRng rng(rng_key({0x73796e74ull, seed}));  // "synt"
  uint64_t ctr = 0;
  auto next = [&](double lo, double hi) { return rng.uniform(ctr++, lo, hi); };

  Tensor img(1, 3, h, w);
  double diag = std::sqrt(static_cast<double>(h) * h + static_cast<double>(w) * w);

  for (int c = 0; c < 3; ++c) {
    double base = next(0.25, 0.75);
    double gx = next(-0.25, 0.25);
    double gy = next(-0.25, 0.25);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x)
        img.at(0, c, y, x) =
            static_cast<float>(base + gx * (x / std::max(1.0, w - 1.0) - 0.5) +
                               gy * (y / std::max(1.0, h - 1.0) - 0.5));
  }

  for (int layer = 0; layer < 4; ++layer) {
    double theta = next(0.0, 2.0 * CounterRng::kPi);
    double period = next(4.0, 28.0);
    double phase = next(0.0, 2.0 * CounterRng::kPi);
    double amp[3] = {next(0.02, 0.14), next(0.02, 0.14), next(0.02, 0.14)};
    double kx = std::cos(theta) * 2.0 * CounterRng::kPi / period;
    double ky = std::sin(theta) * 2.0 * CounterRng::kPi / period;
    for (int c = 0; c < 3; ++c)
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
          img.at(0, c, y, x) +=
              static_cast<float>(amp[c] * std::sin(kx * x + ky * y + phase));
  }

  for (int shape = 0; shape < 5; ++shape) {
    bool disk = next(0.0, 1.0) < 0.5;
    double cx = next(0.0, w);
    double cy = next(0.0, h);
    double rx = next(0.06, 0.25) * diag;
    double ry = disk ? rx : next(0.06, 0.25) * diag;
    double ang = next(0.0, CounterRng::kPi);
    double ca = std::cos(ang), sa = std::sin(ang);
    double color[3] = {next(0.0, 1.0), next(0.0, 1.0), next(0.0, 1.0)};
    double alpha = next(0.3, 0.85);
    const double soft = 1.5;  // pixels of edge feathering
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        double dx = x - cx, dy = y - cy;
        double u = ca * dx + sa * dy, v = -sa * dx + ca * dy;
        double d;  // signed distance-ish to the boundary, >0 outside
        if (disk) {
          d = std::sqrt(dx * dx + dy * dy) - rx;
        } else {
          d = std::max(std::fabs(u) - rx, std::fabs(v) - ry);
        }
        double cover = std::clamp(0.5 - d / (2.0 * soft), 0.0, 1.0);
        if (cover <= 0.0) continue;
        double a = alpha * cover;
        for (int c = 0; c < 3; ++c)
          img.at(0, c, y, x) =
              static_cast<float>((1.0 - a) * img.at(0, c, y, x) + a * color[c]);
      }
  }

  for (size_t i = 0; i < img.numel(); ++i) img[i] = std::clamp(img[i], 0.0f, 1.0f);
  return img;
}

}  // namespace udvd
