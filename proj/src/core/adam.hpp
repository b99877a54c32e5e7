#pragma once
// Adam optimizer with bias correction. Moment tensors are exposed so
// checkpoints can persist them and training resumes exactly.

#include <cstdint>
#include <vector>

#include "core/param.hpp"

namespace udvd {

struct AdamConfig {
  float beta1 = 0.9f;
  float beta2 = 0.999f;
  float eps = 1e-8f;
};

class Adam {
 public:
  Adam() = default;
  explicit Adam(const AdamConfig& cfg) : cfg_(cfg) {}

  // One update over all parameters. Moment slots are created lazily on the
  // first call; a non-finite gradient rejects the whole step.
  void step(std::vector<Parameter>& params, float lr);

  int64_t steps_taken() const { return t_; }
  const AdamConfig& config() const { return cfg_; }

  const std::vector<Tensor>& m() const { return m_; }
  const std::vector<Tensor>& v() const { return v_; }
  void restore(std::vector<Tensor> m, std::vector<Tensor> v, int64_t t);

 private:
  AdamConfig cfg_;
  int64_t t_ = 0;
  std::vector<Tensor> m_, v_;
};

}  // namespace udvd
