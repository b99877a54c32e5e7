#include "core/adam.hpp"

#include <cmath>

#include "core/error.hpp"

namespace udvd {

void Adam::restore(std::vector<Tensor> m, std::vector<Tensor> v, int64_t t) {
  if (m.size() != v.size()) fail(ErrorCode::Config, "adam restore: moment list sizes differ");
  if (t < 0) fail(ErrorCode::Config, "adam restore: negative step count");
  m_ = std::move(m);
  v_ = std::move(v);
  t_ = t;
}

void Adam::step(std::vector<Parameter>& params, float lr) {
  if (m_.empty()) {
    for (const Parameter& p : params) {
      m_.emplace_back(p.value.n(), p.value.c(), p.value.h(), p.value.w());
      v_.emplace_back(p.value.n(), p.value.c(), p.value.h(), p.value.w());
    }
  }
  if (m_.size() != params.size())
    fail(ErrorCode::Config, "adam: optimizer state holds ", m_.size(),
         " slots but got ", params.size(), " parameters");
  for (size_t i = 0; i < params.size(); ++i) {
    if (!params[i].grad.same_shape(params[i].value))
      fail_shape("adam: gradient shape differs from value for '", params[i].name, "'");
    if (!params[i].grad.all_finite())
      fail(ErrorCode::Numeric, "adam: non-finite gradient for '", params[i].name,
           "'; update rejected");
  }

  ++t_;
  const double b1 = cfg_.beta1, b2 = cfg_.beta2, eps = cfg_.eps;
  const double bc1 = 1.0 - std::pow(b1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(b2, static_cast<double>(t_));
  for (size_t i = 0; i < params.size(); ++i) {
    Parameter& p = params[i];
    Tensor& m = m_[i];
    Tensor& v = v_[i];
    for (size_t q = 0; q < p.value.numel(); ++q) {
      double g = p.grad[q];
      double mq = b1 * m[q] + (1.0 - b1) * g;
      double vq = b2 * v[q] + (1.0 - b2) * g * g;
      m[q] = static_cast<float>(mq);
      v[q] = static_cast<float>(vq);
      p.value[q] -= static_cast<float>(lr * (mq / bc1) / (std::sqrt(vq / bc2) + eps));
    }
  }
}

}  // namespace udvd
