#pragma once

#include <cmath>
#include <cstdint>
#include <random>

#include "ctseq/image.hpp"

namespace ctseq {

/// splitmix64 finalizer over two combined words; used to derive independent
/// stream seeds from (master, index) pairs.
inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  std::uint64_t z = a + 0x9e3779b97f4a7c15ULL + (b << 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b,
                              std::uint64_t c) {
  return mix_seed(mix_seed(a, b), c);
}

/// Deterministic random source. Distributions are hand-rolled on top of the
/// (standardized) mt19937_64 word stream so sequences reproduce across
/// standard library implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t bits() { return engine_(); }

  double u01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * u01(); }

  /// Inclusive on both ends.
  long uniform_int(long lo, long hi) {
    return lo + static_cast<long>((static_cast<double>(hi - lo) + 1.0) * u01());
  }

  /// Box-Muller, two fresh uniforms per call (no cached spare).
  double normal() {
    const double u1 = 1.0 - u01();
    const double u2 = u01();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * kPi * u2);
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace ctseq
