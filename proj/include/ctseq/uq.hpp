#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "ctseq/confseq.hpp"
#include "ctseq/forward.hpp"
#include "ctseq/image.hpp"

namespace ctseq {

/// Pixel-wise lower/upper bounds projecting a confidence set onto image
/// coordinates; lower <= upper everywhere, both inside [0, 1].
struct PixelIntervals {
  Image lower;
  Image upper;

  void validate() const;
};

/// Constants of the worst-case interval search.
struct WorstCaseConfig {
  int replicates = 8;
  double init_noise = 1e-3;
  int max_outer_steps = 1000;
  double step_size = 2.0;
  double upper_bound_threshold = 0.999;
  double lower_bound_threshold = 0.001;
  int projection_budget = 10000;
  double projection_learning_rate = 1e-2;
  double decay_hard_projection = 0.9;
  double decay_plateau = 0.5;
  double plateau_tolerance = 1e-5;
  int patience = 10;

  void validate() const;
};

/// Constants of the boundary-spread diversity loss. `projection_budget`
/// bounds the feasibility restoration that follows each diversity step; raw
/// photon-count likelihood gradients are far too large for a single fixed
/// step at the stated learning rate.
struct BoundaryConfig {
  double diversity_weight = 1000.0;
  int steps = 20;
  double learning_rate = 0.01;
  int projection_budget = 300;

  void validate() const;
};

struct ProjectionResult {
  Image image;
  bool converged = false;
  int steps_used = 0;
};

/// Pushes an image back into C_t by adaptive-moment minimization of the
/// cumulative NLL (with [0,1] clamping) until L_t <= beta_t + log(1/delta) or
/// the budget runs out. An image already in the set returns unchanged with 0
/// steps. Non-convergence is a reported status, not a failure.
ProjectionResult project_into_set(const Image& image,
                                  const ConfidenceState& state,
                                  std::span<const Measurement> ms, int budget,
                                  double learning_rate = 1e-2);

struct WorstCaseResult {
  PixelIntervals intervals;
  std::vector<bool> replicate_in_set;  // per final replicate
  int outer_steps = 0;

  bool all_in_set() const;
};

/// Pixel-wise extrema of C_t approximated by K replicates pushed away from
/// their mean under the set constraint: expansion gradient, physical-bound
/// masking, normalized update, projection of violators, with dual step-size
/// decay and plateau patience. Intervals are the pixel-wise min/max over
/// every set-verified replicate state observed during the optimization;
/// replicates whose final projection failed are flagged.
WorstCaseResult worst_case_intervals(const Image& prediction,
                                     const ConfidenceState& state,
                                     std::span<const Measurement> ms,
                                     const WorstCaseConfig& config,
                                     std::uint64_t seed);

/// The boundary-spread objective applied directly to K >= 2 predictor
/// samples. Each of the `steps` rounds recomputes the batch mean, pushes
/// in-set samples apart along the diversity term (weight gamma), and then
/// descends L_t(x) - threshold on any violator until it re-enters the set.
/// Outputs stay in [0, 1].
std::vector<Image> boundary_spread(std::vector<Image> samples,
                                   const ConfidenceState& state,
                                   std::span<const Measurement> ms,
                                   const BoundaryConfig& config);

/// Pixel-wise mean +- t_{1-delta/2, K-1} * sd / sqrt(K), clamped to [0, 1].
/// Zero-variance pixels degenerate to the mean.
PixelIntervals student_t_intervals(std::span<const Image> samples,
                                   double delta);

/// Percentile bootstrap over angle-measurement pairs resampled with
/// replacement: per-pixel nearest-rank delta/2 and 1-delta/2 quantiles of B
/// reconstructions.
PixelIntervals bootstrap_intervals(
    const std::function<Image(std::span<const Measurement>)>& reconstructor,
    std::span<const Measurement> ms, int bootstrap_count, double delta,
    std::uint64_t seed);

/// 0-based index of the nearest-rank q-quantile among n sorted values
/// (1-based rank = ceil(q n), clamped to [1, n]).
std::size_t nearest_rank_index(double q, int n);

/// Zeroes gradient entries that push a pixel past the physical image bounds:
/// value > hi with positive gradient, or value < lo with negative gradient.
void mask_physical_bounds(std::span<const double> values,
                          std::span<double> gradient, double lo, double hi);

}  // namespace ctseq
