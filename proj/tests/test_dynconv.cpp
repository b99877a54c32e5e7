#include <doctest.h>

#include <cmath>

#include "core/dynconv.hpp"
#include "test_util.hpp"

using namespace udvd;
using testutil::fill;

namespace {

double mean_of(const Tensor& t) {
  double s = 0.0;
  for (size_t i = 0; i < t.numel(); ++i) s += t[i];
  return s / static_cast<double>(t.numel());
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
  REQUIRE(a.same_shape(b));
  double worst = 0.0;
  for (size_t i = 0; i < a.numel(); ++i)
    worst = std::max(worst, static_cast<double>(std::abs(a[i] - b[i])));
  return worst;
}

}  // namespace

// Golden values from tests/golden/gen_dynconv.py (float64 loop transcription
// of the defining sum, on inputs rebuilt from the counter RNG).

TEST_CASE("shared kernels, r=1, match the golden values") {
  Tensor in = fill({3001}, 2, 3, 6, 7);
  PerPixelKernels kp{fill({3002}, 2, 9, 6, 7), 3, 1, true};
  Tensor out = dynamic_conv(in, kp);
  REQUIRE(out.same_shape(in));
  CHECK(mean_of(out) == doctest::Approx(0.0871424297754).epsilon(1e-6));
  CHECK(out[0] == doctest::Approx(-0.250651980942).epsilon(1e-5));
  CHECK(out[41] == doctest::Approx(0.582649513031).epsilon(1e-5));
  CHECK(out[151] == doctest::Approx(-0.0810568083642).epsilon(1e-5));
  CHECK(out[251] == doctest::Approx(-1.51686547496).epsilon(1e-5));
}

TEST_CASE("shared kernels, r=2, match the golden values") {
  Tensor in = fill({3003}, 1, 2, 4, 5);
  PerPixelKernels kp{fill({3004}, 1, 36, 4, 5), 3, 2, true};
  Tensor out = dynamic_conv_upsample(in, kp);
  REQUIRE(out.shape() == std::array<int, 4>{1, 2, 8, 10});
  CHECK(mean_of(out) == doctest::Approx(0.159025381519).epsilon(1e-6));
  CHECK(out[0] == doctest::Approx(0.145204539992).epsilon(1e-5));
  CHECK(out[11] == doctest::Approx(-1.93676940742).epsilon(1e-5));
  CHECK(out[80] == doctest::Approx(0.0586192423778).epsilon(1e-5));
  CHECK(out[159] == doctest::Approx(-0.389653245315).epsilon(1e-5));
}

TEST_CASE("per-channel kernels, r=1, match the golden values") {
  Tensor in = fill({3005}, 1, 2, 5, 5);
  PerPixelKernels kp{fill({3006}, 1, 18, 5, 5), 3, 1, false};
  Tensor out = dynamic_conv(in, kp);
  CHECK(mean_of(out) == doctest::Approx(-0.0846898391975).epsilon(1e-6));
  CHECK(out[0] == doctest::Approx(-1.15997928906).epsilon(1e-5));
  CHECK(out[24] == doctest::Approx(-0.361727613121).epsilon(1e-5));
  CHECK(out[37] == doctest::Approx(1.39160619455).epsilon(1e-5));
  CHECK(out[49] == doctest::Approx(0.214920357933).epsilon(1e-5));
}

TEST_CASE("shared kernels, r=3 k=5, match the golden values") {
  Tensor in = fill({3007}, 1, 1, 4, 4);
  PerPixelKernels kp{fill({3008}, 1, 225, 4, 4), 5, 3, true};
  Tensor out = dynamic_conv_upsample(in, kp);
  REQUIRE(out.shape() == std::array<int, 4>{1, 1, 12, 12});
  CHECK(mean_of(out) == doctest::Approx(-0.207259461193).epsilon(1e-6));
  CHECK(out[13] == doctest::Approx(-0.0814036222057).epsilon(1e-5));
  CHECK(out[77] == doctest::Approx(0.398624545795).epsilon(1e-5));
  CHECK(out[143] == doctest::Approx(1.62416833978).epsilon(1e-5));
}

TEST_CASE("fast path agrees with the reference transcription") {
  struct Case {
    int c, h, w, k, r;
    bool shared;
  };
  const Case cases[] = {
      {1, 5, 5, 1, 1, true},  {3, 6, 7, 3, 1, true},  {2, 4, 5, 3, 2, true},
      {1, 4, 4, 5, 3, true},  {2, 8, 3, 5, 1, true},  {3, 5, 6, 3, 1, false},
      {4, 4, 4, 5, 1, false}, {2, 6, 6, 3, 4, true},
  };
  int id = 0;
  for (const Case& cs : cases) {
    ++id;
    Tensor in = fill({3100, static_cast<uint64_t>(id)}, 2, cs.c, cs.h, cs.w);
    int planes = kernel_plane_count(cs.k, cs.r, cs.shared, cs.c);
    PerPixelKernels kp{fill({3101, static_cast<uint64_t>(id)}, 2, planes, cs.h, cs.w), cs.k, cs.r,
                       cs.shared};
    Tensor fast = dynamic_conv_upsample(in, kp);
    Tensor ref = dynamic_conv_ref(in, kp.values, cs.k, cs.r, cs.shared);
    CHECK(max_abs_diff(fast, ref) <= 1e-5);
  }
}

TEST_CASE("upsample with r=1 equals the same-resolution form") {
  Tensor in = fill({3200}, 1, 3, 7, 6);
  PerPixelKernels kp{fill({3201}, 1, 9, 7, 6), 3, 1, true};
  Tensor a = dynamic_conv(in, kp);
  Tensor b = dynamic_conv_upsample(in, kp);
  CHECK(max_abs_diff(a, b) == 0.0);
}

TEST_CASE("identity kernel reproduces the input") {
  Tensor in = fill({3202}, 1, 2, 5, 6);
  // Weight 1 on the (u=0, v=0) tap, channel 4 of 9 for k=3.
  Tensor kvals(1, 9, 5, 6);
  for (int i = 0; i < 5; ++i)
    for (int j = 0; j < 6; ++j) kvals.at(0, 4, i, j) = 1.0f;
  PerPixelKernels kp{kvals, 3, 1, true};
  Tensor out = dynamic_conv(in, kp);
  CHECK(max_abs_diff(out, in) == 0.0);
}

TEST_CASE("an off-center tap shifts the image") {
  Tensor in = fill({3203}, 1, 1, 4, 5);
  // Weight 1 on (u=1, v=0): out(i,j) = in(i-1, j), zero on the first row.
  Tensor kvals(1, 9, 4, 5);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 5; ++j) kvals.at(0, (1 + 1) * 3 + (0 + 1), i, j) = 1.0f;
  PerPixelKernels kp{kvals, 3, 1, true};
  Tensor out = dynamic_conv(in, kp);
  for (int j = 0; j < 5; ++j) CHECK(out.at(0, 0, 0, j) == 0.0f);
  for (int i = 1; i < 4; ++i)
    for (int j = 0; j < 5; ++j) CHECK(out.at(0, 0, i, j) == in.at(0, 0, i - 1, j));
}

TEST_CASE("output is linear in the input") {
  Tensor in = fill({3204}, 1, 2, 5, 5);
  PerPixelKernels kp{fill({3205}, 1, 36, 5, 5), 3, 2, true};
  Tensor base = dynamic_conv_upsample(in, kp);
  Tensor scaled_in = in;
  for (size_t i = 0; i < scaled_in.numel(); ++i) scaled_in[i] *= 2.0f;
  Tensor scaled_out = dynamic_conv_upsample(scaled_in, kp);
  for (size_t i = 0; i < base.numel(); ++i)
    CHECK(scaled_out[i] == doctest::Approx(2.0f * base[i]).epsilon(1e-6));
}

TEST_CASE("backward gradients pass a finite-difference check") {
  struct Case {
    int c, h, w, k, r;
    bool shared;
  };
  const Case cases[] = {{2, 4, 5, 3, 1, true}, {1, 3, 4, 3, 2, true}, {2, 4, 4, 3, 1, false}};
  int id = 0;
  for (const Case& cs : cases) {
    ++id;
    Tensor in = fill({3300, static_cast<uint64_t>(id)}, 1, cs.c, cs.h, cs.w);
    int planes = kernel_plane_count(cs.k, cs.r, cs.shared, cs.c);
    PerPixelKernels kp{fill({3301, static_cast<uint64_t>(id)}, 1, planes, cs.h, cs.w), cs.k, cs.r,
                       cs.shared};
    Tensor up = fill({3302, static_cast<uint64_t>(id)}, 1, cs.c, cs.h * cs.r, cs.w * cs.r);

    DynConvGrads g = dynamic_conv_backward(up, in, kp);

    TensorD ind = in.cast<double>(), kd = kp.values.cast<double>(), upd = up.cast<double>();
    auto objective = [&]() {
      TensorD out = dynamic_conv_ref(ind, kd, cs.k, cs.r, cs.shared);
      double s = 0.0;
      for (size_t i = 0; i < out.numel(); ++i) s += out[i] * upd[i];
      return s;
    };
    auto rin = testutil::fd_compare(ind, g.input, objective);
    CHECK(rin.failed == 0);
    auto rk = testutil::fd_compare(kd, g.kernels, objective);
    CHECK(rk.failed == 0);
  }
}

TEST_CASE("geometry violations are rejected") {
  Tensor in = fill({3400}, 1, 2, 4, 4);

  // Even k.
  CHECK_THROWS_AS(dynamic_conv(in, PerPixelKernels{Tensor(1, 4, 4, 4), 2, 1, true}), Error);
  // r < 1.
  CHECK_THROWS_AS(dynamic_conv_upsample(in, PerPixelKernels{Tensor(1, 9, 4, 4), 3, 0, true}),
                  Error);
  // Per-channel kernels with r > 1.
  CHECK_THROWS_AS(dynamic_conv_upsample(in, PerPixelKernels{Tensor(1, 72, 4, 4), 3, 2, false}),
                  Error);
  // Same-resolution entry point with r > 1.
  CHECK_THROWS_AS(dynamic_conv(in, PerPixelKernels{Tensor(1, 36, 4, 4), 3, 2, true}), Error);
  // Wrong channel count.
  try {
    dynamic_conv(in, PerPixelKernels{Tensor(1, 8, 4, 4), 3, 1, true});
    FAIL("expected error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::Shape);
  }
  // Kernel grid does not cover the input.
  CHECK_THROWS_AS(dynamic_conv(in, PerPixelKernels{Tensor(1, 9, 3, 4), 3, 1, true}), Error);
  // Batch mismatch.
  CHECK_THROWS_AS(dynamic_conv(in, PerPixelKernels{Tensor(2, 9, 4, 4), 3, 1, true}), Error);

  // Upstream shape mismatch in backward.
  PerPixelKernels ok{fill({3401}, 1, 9, 4, 4), 3, 1, true};
  CHECK_THROWS_AS(dynamic_conv_backward(Tensor(1, 2, 5, 4), in, ok), Error);
}
