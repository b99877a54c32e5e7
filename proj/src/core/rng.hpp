#pragma once
// Counter-based deterministic RNG. Every variate is a pure function of
// (key, counter), so the same seed gives the same stream regardless of
// evaluation order or parallel schedule.

#include <cmath>
#include <cstdint>
#include <initializer_list>

namespace udvd {

inline uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

// Folds a list of words (seed, step, item id, ...) into one stream key.
inline uint64_t rng_key(std::initializer_list<uint64_t> words) {
  uint64_t k = 0x243f6a8885a308d3ull;
  for (uint64_t w : words) k = splitmix64(k ^ w);
  return k;
}

inline uint64_t hash_str(const char* s) {
  uint64_t h = 0xcbf29ce484222325ull;  // FNV-1a
  while (*s) {
    h ^= static_cast<unsigned char>(*s++);
    h *= 0x100000001b3ull;
  }
  return h;
}

class CounterRng {
 public:
  explicit CounterRng(uint64_t key) : key_(key) {}
  CounterRng(std::initializer_list<uint64_t> words) : key_(rng_key(words)) {}

  uint64_t bits(uint64_t counter) const { return splitmix64(key_ ^ splitmix64(counter)); }

  // Uniform in [0, 1).
  double uniform(uint64_t counter) const {
    return static_cast<double>(bits(counter) >> 11) * 0x1.0p-53;
  }

  double uniform(uint64_t counter, double lo, double hi) const {
    return lo + (hi - lo) * uniform(counter);
  }

  // Uniform index in [0, n); n must be > 0.
  uint64_t index(uint64_t counter, uint64_t n) const { return bits(counter) % n; }

  // Standard normal via Box-Muller; consumes counters 2i and 2i+1.
  double normal(uint64_t i) const {
    double u1 = static_cast<double>((bits(2 * i) >> 11) + 1) * 0x1.0p-53;  // (0,1]
    double u2 = uniform(2 * i + 1);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * kPi * u2);
  }

  static constexpr double kPi = 3.14159265358979323846;

 private:
  uint64_t key_;
};

}  // namespace udvd
