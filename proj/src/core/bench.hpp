#pragma once
// Micro-benchmark for the per-pixel convolution: times the brute-force
// reference against the optimized implementation on one instance and reports
// both in milliseconds. Runs single-threaded; the fastest of several timed
// repetitions is kept, which is the usual noise-robust estimator for short
// kernels.

#include <cstdint>
#include <string>

namespace udvd {

inline constexpr const char* kBenchCsvHeader = "op,size,k,ref_ms,opt_ms,speedup";

struct BenchResult {
  std::string op;
  int size = 0;  // square input edge
  int k = 0;
  double ref_ms = 0.0;
  double opt_ms = 0.0;
  // Largest |reference − optimized| across the output; doubles as a sink so
  // the compiler cannot discard the timed work.
  float max_abs_diff = 0.0f;

  double speedup() const { return opt_ms > 0.0 ? ref_ms / opt_ms : 0.0; }
  // One row matching kBenchCsvHeader: times to 3 decimals, speedup to 2.
  std::string csv_row() const;
};

// Times channel-shared r=1 per-pixel filtering of a random (1,3,size,size)
// image with k×k kernels.
BenchResult bench_dynconv(int size, int k, int reps = 3, uint64_t seed = 1);

// Reads the recorded performance bar, a JSON object {"min_speedup": x}, x > 0.
double load_min_speedup(const std::string& path);

}  // namespace udvd
