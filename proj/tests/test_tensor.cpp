#include <doctest.h>

#include <cmath>
#include <limits>

#include "core/error.hpp"
#include "core/tensor.hpp"

using namespace udvd;

TEST_CASE("construction zero-fills and records shape") {
  Tensor t(2, 3, 4, 5);
  CHECK(t.n() == 2);
  CHECK(t.c() == 3);
  CHECK(t.h() == 4);
  CHECK(t.w() == 5);
  CHECK(t.numel() == 120);
  for (size_t i = 0; i < t.numel(); ++i) CHECK(t[i] == 0.0f);
}

TEST_CASE("negative dims are rejected with a shape error") {
  CHECK_THROWS_AS(Tensor(1, -2, 3, 3), Error);
  try {
    Tensor t(1, -2, 3, 3);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::Shape);
  }
}

TEST_CASE("layout is NCHW with w fastest") {
  Tensor t(2, 3, 4, 5);
  CHECK(t.offset(0, 0, 0, 0) == 0);
  CHECK(t.offset(0, 0, 0, 1) == 1);
  CHECK(t.offset(0, 0, 1, 0) == 5);
  CHECK(t.offset(0, 1, 0, 0) == 20);
  CHECK(t.offset(1, 0, 0, 0) == 60);
  t.at(1, 2, 3, 4) = 7.0f;
  CHECK(t[t.numel() - 1] == 7.0f);
}

TEST_CASE("filled and scalar factories") {
  Tensor t = Tensor::filled(1, 1, 2, 2, 1.5f);
  for (size_t i = 0; i < 4; ++i) CHECK(t[i] == 1.5f);
  Tensor s = Tensor::scalar(-3.0f);
  CHECK(s.numel() == 1);
  CHECK(s[0] == -3.0f);
}

TEST_CASE("cast converts element type and keeps shape") {
  Tensor t(1, 2, 1, 1);
  t[0] = 0.1f;
  t[1] = -2.0f;
  TensorD d = t.cast<double>();
  CHECK(d.same_shape(TensorD(1, 2, 1, 1)));
  CHECK(d[0] == doctest::Approx(0.1).epsilon(1e-7));
  CHECK(d[1] == -2.0);
  Tensor back = d.cast<float>();
  CHECK(back[0] == t[0]);
}

TEST_CASE("all_finite detects NaN and infinity") {
  Tensor t(1, 1, 2, 2);
  CHECK(t.all_finite());
  t[1] = std::numeric_limits<float>::quiet_NaN();
  CHECK_FALSE(t.all_finite());
  t[1] = 0.0f;
  t[3] = std::numeric_limits<float>::infinity();
  CHECK_FALSE(t.all_finite());
}

TEST_CASE("empty default tensor") {
  Tensor t;
  CHECK(t.empty());
  CHECK(t.numel() == 0);
}
