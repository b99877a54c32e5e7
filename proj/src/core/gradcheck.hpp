#pragma once
// Finite-difference validation of the backward pass. Analytic gradients come
// from the production float tape; the numeric side re-evaluates the same
// objective in double precision with central differences, which keeps
// step-cancellation error far below the comparison tolerance.

#include <cstdint>
#include <string>
#include <vector>

namespace udvd {

struct GradCheckItem {
  std::string name;        // operation input or model parameter tensor
  int checked = 0;         // finite-difference samples evaluated
  int failed = 0;          // samples whose relative error exceeded the tolerance
  double worst_rel = 0.0;  // largest relative error seen
  // An item passes when at least 99% of its samples are within tolerance.
  bool ok() const { return checked > 0 && (checked - failed) * 100 >= checked * 99; }
};

struct GradCheckReport {
  std::vector<GradCheckItem> items;
  int checked() const;
  int failed() const;
  double worst_rel() const;
  // True when at least 99% of all samples across the report are within
  // tolerance. The allowance absorbs finite-difference steps that straddle a
  // ReLU kink; per-entry probes confirm those converge to the analytic value
  // as the step shrinks, so they are artifacts of the probe, not the tape.
  bool ok() const;
};

// Probes every entry of every differentiable leaf through the autodiff tape:
// conv2d (input, weight, bias), relu, pixel_shuffle, concat, add, l2_loss,
// and the dynamic convolutions in channel-shared, per-channel, and
// upsampling forms.
GradCheckReport grad_check_ops(uint64_t seed = 7, double step = 1e-3, double tol = 1e-3);

// Probes the full training objective of a small two-stage model end to end,
// sampling a fixed-seed subset of entries from every parameter tensor.
GradCheckReport grad_check_model(uint64_t seed = 7, double step = 1e-3, double tol = 1e-3,
                                 int per_tensor = 40);

// Both suites concatenated; this is what the command-line check runs.
GradCheckReport grad_check_all(uint64_t seed = 7);

}  // namespace udvd
