#pragma once

#include <span>
#include <vector>

#include "ctseq/forward.hpp"
#include "ctseq/image.hpp"
#include "ctseq/radon.hpp"

namespace ctseq {

/// Adaptive-moment optimizer constants; the reconstruction baseline uses 100
/// steps at learning rate 1e-2.
struct OptimizerConfig {
  int steps = 100;
  double learning_rate = 1e-2;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  void validate() const;
};

struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  long t = 0;

  explicit AdamState(std::size_t n) : m(n, 0.0), v(n, 0.0) {}
};

/// One bias-corrected adaptive-moment descent step: iterate -= lr * mhat /
/// (sqrt(vhat) + eps). No projection; callers clamp as needed.
void adam_step(std::span<double> iterate, std::span<const double> gradient,
               AdamState& state, const OptimizerConfig& config);

/// Ram-Lak filtering of one projection through a zero-padded DFT of length
/// next_pow2(2n).
std::vector<double> ramp_filter(std::span<const double> projection);

/// Filtered backprojection: counts -> line integrals (log transform, zero
/// counts clamped to 1), ramp filter, backprojection scaled by
/// pi/(#angles) * (r/l), clamped to [0, 1].
Image fbp(std::span<const Measurement> ms, const Projector& proj);
Image fbp(std::span<const Measurement> ms, const Geometry& geom);

/// Incremental FBP: filtered backprojections accumulate one measurement at a
/// time; reconstruct() applies the angle-count normalization and clamp.
class FbpAccumulator {
 public:
  explicit FbpAccumulator(const Projector& proj);

  void add(const Measurement& m);
  int count() const { return count_; }
  Image reconstruct() const;

 private:
  const Projector* proj_;
  int count_ = 0;
  std::vector<double> sum_;
};

/// Approximate maximum-likelihood reconstruction: `config.steps` adaptive-
/// moment updates on the cumulative NLL, projected onto [0,1] after every
/// step. Never returns an iterate with higher cumulative NLL than `init`.
Image mle(std::span<const Measurement> ms, const Image& init,
          const OptimizerConfig& config, const Projector& proj);
Image mle(std::span<const Measurement> ms, const Image& init,
          const OptimizerConfig& config, const Geometry& geom);

/// Separable Gaussian smoothing with a renormalized kernel at the borders,
/// clamped to [0,1]. sigma = 0 is the identity.
Image gaussian_smooth(const Image& image, double sigma);

}  // namespace ctseq
