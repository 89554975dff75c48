#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "ctseq/image.hpp"
#include "ctseq/radon.hpp"

namespace ctseq {

/// One acquisition step: a view angle, the per-bin incident intensity I0, and
/// the observed photon counts.
struct Measurement {
  double angle = 0.0;       // degrees in [0, 180)
  double intensity = 0.0;   // per-bin incident photon count I0
  std::vector<std::int64_t> counts;

  void validate(int side) const;
};

/// Beer-Lambert mean counts: I0 * exp(-(l/r) [R_angle x]_i) per bin.
std::vector<double> mean_counts(const Image& image, double angle_deg,
                                double intensity, const Geometry& geom);
std::vector<double> mean_counts(const Image& image, double angle_deg,
                                double intensity, const Projector& proj);

/// Independent Poisson draws, one per bin; deterministic given the seed.
std::vector<std::int64_t> sample_counts(std::span<const double> means,
                                        std::uint64_t seed);

/// Simulates one measurement at twice the target resolution (2r detector bins
/// at intensity I0/2 each) and sums adjacent bin pairs. Sums of independent
/// Poissons are Poisson, so the result is an exact draw whose mean does not
/// share the target-resolution discretization.
Measurement simulate_step(const Image& truth_highres, double angle_deg,
                          double intensity, std::uint64_t seed,
                          const Geometry& target_geom);

/// Acquisition schedule. Sparse mode: one angle per step at constant per-bin
/// intensity. Dense mode: the full angle grid each step; `intensities[t]` is
/// the step intensity I0_t, divided evenly over the grid (per-angle I0_t/n).
struct AcquisitionPlan {
  enum class Mode { kSparse, kDense };

  Mode mode = Mode::kSparse;
  std::vector<double> angles;
  std::vector<double> intensities;  // sparse: per-bin I0 per step
  int warmup_steps = 0;

  int total_steps() const {
    return static_cast<int>(mode == Mode::kSparse ? angles.size()
                                                  : intensities.size());
  }
  int confidence_steps() const { return total_steps() - warmup_steps; }
  void validate() const;
};

/// Golden-angle sequence: k * 137.5077...deg mod 180, maximal early coverage.
std::vector<double> golden_angle_schedule(int n);

/// Uniform grid over [0, 180) in a seed-determined order.
std::vector<double> shuffled_uniform_schedule(int n, std::uint64_t seed);

/// n uniformly spaced angles over [0, 180).
std::vector<double> uniform_angle_grid(int n);

/// Exponentially spaced grid from lo to hi inclusive.
std::vector<double> exponential_intensity_grid(double lo, double hi, int steps);

AcquisitionPlan make_sparse_plan(std::vector<double> angles,
                                 double per_bin_intensity, int warmup_steps);
AcquisitionPlan make_dense_plan(int grid_size,
                                std::vector<double> step_intensities,
                                int warmup_steps);

}  // namespace ctseq
