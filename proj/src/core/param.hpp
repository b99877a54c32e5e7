#pragma once
// Named trainable tensor plus its gradient slot.

#include <string>
#include <utility>

#include "core/tensor.hpp"

namespace udvd {

struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;  // same shape as value; zeros until a backward pass fills it

  Parameter() = default;
  Parameter(std::string n, Tensor v) : name(std::move(n)), value(std::move(v)) {
    grad = Tensor(value.n(), value.c(), value.h(), value.w());
  }
};

}  // namespace udvd
