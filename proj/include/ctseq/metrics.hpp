#pragma once

#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "ctseq/image.hpp"
#include "ctseq/uq.hpp"

namespace ctseq {

/// 10 log10(1 / MSE) with peak 1.0; +inf sentinel for exact equality.
double psnr(const Image& recon, const Image& truth);

struct RateWithSe {
  double rate = 0.0;
  double sem = 0.0;
};

/// Mean of the flags with the binomial standard error sqrt(p(1-p)/N).
RateWithSe binomial_rate(const std::vector<bool>& flags);
inline RateWithSe crossover_rate(const std::vector<bool>& flags) {
  return binomial_rate(flags);
}

/// Per-angle fraction of runs whose rotated candidate misses the final set.
/// excluded[a][run] = final-step non-membership at rotation angle a.
std::vector<RateWithSe> exclusion_rate(
    const std::vector<std::vector<bool>>& excluded);

/// Fraction of pixels with lower <= truth <= upper, and mean(upper - lower).
std::pair<double, double> coverage_and_width(const PixelIntervals& intervals,
                                             const Image& truth);

/// Area under the sparsification error curve: pixels are removed in 1% steps
/// by decreasing uncertainty, the mean absolute error of the remainder is
/// compared against the oracle (error-ordered) curve, both normalized by the
/// full-image MAE. Zero total error yields 0.
double ause(const Image& uncertainty, const Image& error);

/// One stored run trajectory for post-hoc threshold evaluation.
struct StoredTrajectory {
  std::vector<double> beta;
  std::vector<double> truth_nll;
};

/// Crossover rate recomputed from stored trajectories at each delta.
std::vector<RateWithSe> calibration_curve(
    std::span<const StoredTrajectory> runs, std::span<const double> deltas);

struct HallucinationReport {
  double flag_rate = 0.0;                // fraction of out-of-set samples
  std::optional<double> psnr_in_set;     // absent when the group is empty
  std::optional<double> psnr_out_of_set;
};

/// Aggregates per-sample set membership and PSNR-vs-truth into the flag rate
/// and conditional PSNR means. +inf PSNR entries dominate their group mean.
HallucinationReport hallucination_report(const std::vector<bool>& out_of_set,
                                         std::span<const double> psnr_values);

}  // namespace ctseq
