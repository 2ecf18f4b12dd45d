#pragma once

#include <cstdint>

namespace trop {

/// splitmix64; cheap, seedable, stable across platforms.
struct SplitMix64 {
  uint64_t state;

  explicit SplitMix64(uint64_t seed) : state(seed) {}

  uint64_t next() {
    uint64_t z = (state += 0x9E3779B97F4A7C15ull);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  /// Uniform in [0,1), 53 mantissa bits.
  double uniform01() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  double uniform(double a, double b) { return a + (b - a) * uniform01(); }

  /// Uniform in {0, ..., n-1}. Bias is < n / 2^64, irrelevant for small n.
  uint64_t below(uint64_t n) { return next() % n; }
};

/// Order-sensitive seed derivation, e.g. hash_mix(hash_mix(seed, shell), chunk).
inline uint64_t hash_mix(uint64_t a, uint64_t b) {
  SplitMix64 s(a ^ (b + 0x9E3779B97F4A7C15ull + (a << 6) + (a >> 2)));
  s.next();
  return s.next();
}

}  // namespace trop
