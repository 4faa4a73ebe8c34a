#pragma once

#include <cstdint>
#include <random>

namespace relucut {

/// Deterministic RNG wrapper. Distributions are hand-rolled on top of the
/// raw mt19937_64 stream so generated values are identical across standard
/// library implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t next() { return gen_(); }

  /// Uniform in [0, 1).
  double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n).
  std::uint64_t uniform_int(std::uint64_t n) {
    // Rejection-free modulo is fine here; n is tiny relative to 2^64.
    return gen_() % n;
  }

 private:
  std::mt19937_64 gen_;
};

}  // namespace relucut
