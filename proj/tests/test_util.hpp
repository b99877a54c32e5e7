#pragma once
// Helpers shared by the test binaries: deterministic tensor filling that
// matches tests/golden/udvd_ref.py, and central-difference gradient checks
// against the double-precision reference path.

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "core/rng.hpp"
#include "core/tensor.hpp"

namespace udvd::testutil {

inline Tensor fill(std::initializer_list<uint64_t> key, int n, int c, int h, int w,
                   double lo = -1.0, double hi = 1.0) {
  CounterRng rng(key);
  Tensor t(n, c, h, w);
  for (size_t i = 0; i < t.numel(); ++i) t[i] = static_cast<float>(rng.uniform(i, lo, hi));
  return t;
}

struct FdReport {
  int checked = 0;
  int failed = 0;
  double worst_rel = 0.0;
};

// Central differences on a double tensor against an analytic gradient.
// loss() must re-evaluate the objective from the current contents of param;
// entries are perturbed by +-step one at a time. When max_entries > 0 a
// fixed-seed subset of that size is checked instead of every entry.
inline FdReport fd_compare(TensorD& param, const Tensor& analytic,
                           const std::function<double()>& loss, double step = 1e-3,
                           double tol = 1e-3, int max_entries = -1, uint64_t seed = 1) {
  FdReport rep;
  size_t n = param.numel();
  std::vector<size_t> picks;
  if (max_entries > 0 && static_cast<size_t>(max_entries) < n) {
    CounterRng rng({seed});
    for (int i = 0; i < max_entries; ++i) picks.push_back(rng.index(i, n));
  } else {
    for (size_t i = 0; i < n; ++i) picks.push_back(i);
  }
  for (size_t idx : picks) {
    double keep = param[idx];
    param[idx] = keep + step;
    double up = loss();
    param[idx] = keep - step;
    double dn = loss();
    param[idx] = keep;
    double fd = (up - dn) / (2.0 * step);
    double an = analytic[idx];
    double rel = std::abs(an - fd) / std::max({std::abs(an), std::abs(fd), 1e-6});
    ++rep.checked;
    rep.worst_rel = std::max(rep.worst_rel, rel);
    if (rel > tol) ++rep.failed;
  }
  return rep;
}

}  // namespace udvd::testutil
