// Copyright 2026 The Protolex Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef PROTOLEX_UTIL_RNG_HPP_
#define PROTOLEX_UTIL_RNG_HPP_

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace protolex {

// Deterministic RNG used by every randomized operation in the pipeline.
//
// The engine is std::mt19937_64 (its output sequence is pinned by the
// standard), but all distributions are implemented here because the
// std::*_distribution classes are implementation-defined and would break
// the "same seed, same bytes" contract across toolchains.
class Rng {
 public:
  explicit Rng(uint64_t seed) : engine_(Mix(seed)) {}

  uint64_t NextU64() { return engine_(); }

  // Uniform in [0, n). Rejection sampling, exactly unbiased.
  uint64_t UniformInt(uint64_t n) {
    if (n <= 1) return 0;
    const uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    uint64_t x;
    do {
      x = engine_();
    } while (x >= limit);
    return x % n;
  }

  // Uniform double in [0, 1) with 53 random bits.
  double Uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  double Uniform(double lo, double hi) { return lo + (hi - lo) * Uniform(); }

  bool Bernoulli(double p) { return Uniform() < p; }

  // Standard normal via Box-Muller; the spare value is cached.
  double Normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1, u2;
    do {
      u1 = Uniform();
    } while (u1 <= 0.0);
    u2 = Uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * M_PI * u2;
    spare_ = r * std::sin(theta);
    have_spare_ = true;
    return r * std::cos(theta);
  }

  template <typename T>
  void Shuffle(std::vector<T>& v) {
    for (size_t i = v.size(); i > 1; --i) {
      const size_t j = static_cast<size_t>(UniformInt(i));
      std::swap(v[i - 1], v[j]);
    }
  }

  // Derives an independent stream seed from a base seed and a path of
  // indices (run id, epoch, batch, item, ...). Pure function, so the result
  // does not depend on scheduling order.
  static uint64_t Derive(uint64_t base, std::initializer_list<uint64_t> path) {
    uint64_t h = Mix(base);
    for (uint64_t p : path) h = Mix(h ^ Mix(p + 0x9e3779b97f4a7c15ULL));
    return h;
  }

 private:
  // splitmix64 finalizer; decorrelates nearby seeds.
  static uint64_t Mix(uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

}  // namespace protolex

#endif  // PROTOLEX_UTIL_RNG_HPP_
