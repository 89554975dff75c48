#include "ctseq/poisson.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace ctseq {

namespace {

std::int64_t poisson_inversion(Rng& rng, double mean) {
  const double u = rng.u01();
  double p = std::exp(-mean);
  double cum = p;
  std::int64_t k = 0;
  const std::int64_t cap = 200;  // far past any mass for mean <= 10
  while (u > cum && k < cap) {
    ++k;
    p *= mean / static_cast<double>(k);
    cum += p;
  }
  return k;
}

// Hormann (1993), transformed rejection with the exact acceptance test.
std::int64_t poisson_ptrd(Rng& rng, double mean) {
  const double smu = std::sqrt(mean);
  const double b = 0.931 + 2.53 * smu;
  const double a = -0.059 + 0.02483 * b;
  const double inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
  const double v_r = 0.9277 - 3.6224 / (b - 2.0);
  const double log_mean = std::log(mean);
  for (;;) {
    double v = rng.u01();
    double u;
    if (v <= 0.86 * v_r) {
      u = v / v_r - 0.43;
      return static_cast<std::int64_t>(
          std::floor((2.0 * a / (0.5 - std::fabs(u)) + b) * u + mean + 0.445));
    }
    if (v >= v_r) {
      u = rng.u01() - 0.5;
    } else {
      u = v / v_r - 0.93;
      u = (u < 0.0 ? -0.5 : 0.5) - u;
      v = rng.u01() * v_r;
    }
    const double us = 0.5 - std::fabs(u);
    if (us <= 0.0 || (us < 0.013 && v > us)) continue;
    const double k = std::floor((2.0 * a / us + b) * u + mean + 0.445);
    v = v * inv_alpha / (a / (us * us) + b);
    if (k >= 0.0 &&
        std::log(v) <= k * log_mean - mean - std::lgamma(k + 1.0)) {
      return static_cast<std::int64_t>(k);
    }
  }
}

}  // namespace

std::int64_t poisson_sample(Rng& rng, double mean) {
  if (!(mean > 0.0) || !std::isfinite(mean))
    throw std::invalid_argument("poisson_sample: mean must be finite and > 0");
  return mean <= 10.0 ? poisson_inversion(rng, mean) : poisson_ptrd(rng, mean);
}

double poisson_log_pmf(std::int64_t k, double mean) {
  if (k < 0) return -std::numeric_limits<double>::infinity();
  const double kd = static_cast<double>(k);
  return kd * std::log(mean) - mean - std::lgamma(kd + 1.0);
}

}  // namespace ctseq
