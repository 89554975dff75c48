#include "ctseq/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "ctseq/confseq.hpp"

namespace ctseq {

double psnr(const Image& recon, const Image& truth) {
  if (recon.side() != truth.side())
    throw std::invalid_argument("psnr: side mismatch");
  const auto a = recon.values();
  const auto b = truth.values();
  double mse = 0.0;
  for (std::size_t p = 0; p < a.size(); ++p) {
    const double d = a[p] - b[p];
    mse += d * d;
  }
  mse /= static_cast<double>(a.size());
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(1.0 / mse);
}

RateWithSe binomial_rate(const std::vector<bool>& flags) {
  if (flags.empty()) throw std::invalid_argument("binomial_rate: no runs");
  double sum = 0.0;
  for (bool f : flags) sum += f ? 1.0 : 0.0;
  const double n = static_cast<double>(flags.size());
  const double p = sum / n;
  return RateWithSe{p, std::sqrt(p * (1.0 - p) / n)};
}

std::vector<RateWithSe> exclusion_rate(
    const std::vector<std::vector<bool>>& excluded) {
  std::vector<RateWithSe> out;
  out.reserve(excluded.size());
  for (const auto& per_run : excluded) {
    std::vector<bool> flags(per_run.begin(), per_run.end());
    out.push_back(binomial_rate(flags));
  }
  return out;
}

std::pair<double, double> coverage_and_width(const PixelIntervals& intervals,
                                             const Image& truth) {
  if (intervals.lower.side() != truth.side())
    throw std::invalid_argument("coverage_and_width: side mismatch");
  const auto lo = intervals.lower.values();
  const auto hi = intervals.upper.values();
  const auto tv = truth.values();
  double covered = 0.0;
  double width = 0.0;
  for (std::size_t p = 0; p < tv.size(); ++p) {
    if (lo[p] <= tv[p] && tv[p] <= hi[p]) covered += 1.0;
    width += hi[p] - lo[p];
  }
  const double n = static_cast<double>(tv.size());
  return {covered / n, width / n};
}

namespace {

// Mean absolute error of the pixels remaining after removing the `removed`
// highest-ranked ones under `order`.
std::vector<double> sparsification_curve(const std::vector<std::size_t>& order,
                                         std::span<const double> err,
                                         int steps) {
  const std::size_t n = order.size();
  // suffix sums over the removal order: entry r = MAE after removing r pixels
  std::vector<double> suffix(n + 1, 0.0);
  for (std::size_t i = n; i-- > 0;)
    suffix[i] = suffix[i + 1] + err[order[i]];
  std::vector<double> curve(steps);
  for (int s = 0; s < steps; ++s) {
    const std::size_t removed =
        std::min<std::size_t>(n - 1, (n * static_cast<std::size_t>(s)) / steps);
    curve[s] = suffix[removed] / static_cast<double>(n - removed);
  }
  return curve;
}

std::vector<std::size_t> order_by_desc(std::span<const double> key) {
  std::vector<std::size_t> order(key.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return key[a] > key[b]; });
  return order;
}

}  // namespace

double ause(const Image& uncertainty, const Image& error) {
  if (uncertainty.side() != error.side())
    throw std::invalid_argument("ause: side mismatch");
  const auto unc = uncertainty.values();
  const auto err = error.values();
  double total = 0.0;
  for (double e : err) total += e;
  if (total == 0.0) return 0.0;
  const double full_mae = total / static_cast<double>(err.size());

  constexpr int kSteps = 100;  // 1% removal granularity
  const auto curve_unc = sparsification_curve(order_by_desc(unc), err, kSteps);
  const auto curve_oracle =
      sparsification_curve(order_by_desc(err), err, kSteps);
  double area = 0.0;
  for (int s = 0; s < kSteps; ++s)
    area += (curve_unc[s] - curve_oracle[s]) / full_mae;
  return area / kSteps;
}

std::vector<RateWithSe> calibration_curve(
    std::span<const StoredTrajectory> runs, std::span<const double> deltas) {
  if (runs.empty()) throw std::invalid_argument("calibration_curve: no runs");
  std::vector<RateWithSe> out;
  out.reserve(deltas.size());
  std::vector<bool> flags(runs.size());
  for (double delta : deltas) {
    for (std::size_t r = 0; r < runs.size(); ++r)
      flags[r] = crossover_flag(runs[r].beta, runs[r].truth_nll, delta);
    out.push_back(binomial_rate(flags));
  }
  return out;
}

HallucinationReport hallucination_report(const std::vector<bool>& out_of_set,
                                         std::span<const double> psnr_values) {
  if (out_of_set.size() != psnr_values.size())
    throw std::invalid_argument("hallucination_report: length mismatch");
  if (out_of_set.empty())
    throw std::invalid_argument("hallucination_report: no samples");
  double flagged = 0.0;
  double in_sum = 0.0, out_sum = 0.0;
  std::size_t in_n = 0, out_n = 0;
  for (std::size_t i = 0; i < out_of_set.size(); ++i) {
    if (out_of_set[i]) {
      flagged += 1.0;
      out_sum += psnr_values[i];
      ++out_n;
    } else {
      in_sum += psnr_values[i];
      ++in_n;
    }
  }
  HallucinationReport report;
  report.flag_rate = flagged / static_cast<double>(out_of_set.size());
  if (in_n > 0) report.psnr_in_set = in_sum / static_cast<double>(in_n);
  if (out_n > 0) report.psnr_out_of_set = out_sum / static_cast<double>(out_n);
  return report;
}

}  // namespace ctseq
