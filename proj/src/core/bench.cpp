#include "core/bench.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "core/dynconv.hpp"
#include "core/rng.hpp"

namespace udvd {

namespace {

template <typename Fn>
double best_of_ms(int reps, Fn&& fn) {
  fn();  // warmup: touches every page and primes caches for both sides alike
  double best = 1e300;
  for (int i = 0; i < reps; ++i) {
    auto t0 = std::chrono::steady_clock::now();
    fn();
    auto t1 = std::chrono::steady_clock::now();
    best = std::min(best, std::chrono::duration<double, std::milli>(t1 - t0).count());
  }
  return best;
}

}  // namespace

std::string BenchResult::csv_row() const {
  std::ostringstream ss;
  ss.setf(std::ios::fixed);
  ss.precision(3);
  ss << op << ',' << size << ',' << k << ',' << ref_ms << ',' << opt_ms << ',';
  ss.precision(2);
  ss << speedup();
  return ss.str();
}

BenchResult bench_dynconv(int size, int k, int reps, uint64_t seed) {
  if (size < k || size > 4096) fail_param("bench: size must be in [k, 4096], got ", size);
  if (k < 1 || k > 15 || k % 2 == 0) fail_param("bench: k must be odd and in [1,15], got ", k);
  if (reps < 1 || reps > 100) fail_param("bench: reps must be in [1,100], got ", reps);

  CounterRng rng({0x62656e63, seed});  // "benc"
  Tensor input(1, 3, size, size);
  for (size_t i = 0; i < input.numel(); ++i)
    input[i] = static_cast<float>(rng.uniform(i, 0.0, 1.0));
  Tensor kern(1, k * k, size, size);
  CounterRng krng({0x62656e63, seed, 1});
  for (size_t i = 0; i < kern.numel(); ++i)
    kern[i] = static_cast<float>(krng.uniform(i, -0.5, 0.5));
  PerPixelKernels pk{kern, k, 1, true};

  BenchResult r;
  r.op = "dynconv";
  r.size = size;
  r.k = k;

  Tensor out_ref, out_opt;
  r.ref_ms = best_of_ms(reps, [&] { out_ref = dynamic_conv_ref<float>(input, kern, k, 1, true); });
  r.opt_ms = best_of_ms(reps, [&] { out_opt = dynamic_conv(input, pk); });
  for (size_t i = 0; i < out_ref.numel(); ++i)
    r.max_abs_diff = std::max(r.max_abs_diff, std::fabs(out_ref[i] - out_opt[i]));
  return r;
}

double load_min_speedup(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in.good()) fail(ErrorCode::Io, "cannot open ", path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::Config, "bad benchmark baseline ", path, ": ", e.what());
  }
  if (!j.is_object() || j.size() != 1 || !j.contains("min_speedup") ||
      !j["min_speedup"].is_number())
    fail(ErrorCode::Config, "benchmark baseline ", path,
         " must be exactly {\"min_speedup\": number}");
  double v = j["min_speedup"].get<double>();
  if (!(v > 0.0)) fail(ErrorCode::Config, "benchmark baseline min_speedup must be > 0, got ", v);
  return v;
}

}  // namespace udvd
