#include "ctseq/uq.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "ctseq/likelihood.hpp"
#include "ctseq/recon.hpp"
#include "ctseq/rng.hpp"
#include "ctseq/stats.hpp"

namespace ctseq {

void PixelIntervals::validate() const {
  if (lower.side() != upper.side())
    throw std::invalid_argument("PixelIntervals: side mismatch");
  const auto lo = lower.values();
  const auto hi = upper.values();
  for (std::size_t p = 0; p < lo.size(); ++p)
    if (lo[p] > hi[p])
      throw std::invalid_argument("PixelIntervals: lower > upper");
}

void WorstCaseConfig::validate() const {
  if (replicates < 1 || max_outer_steps < 1 || projection_budget < 1 ||
      patience < 1)
    throw std::invalid_argument("WorstCaseConfig: counts must be positive");
  if (!(init_noise >= 0.0) || !(step_size > 0.0) ||
      !(projection_learning_rate > 0.0) || !(plateau_tolerance > 0.0))
    throw std::invalid_argument("WorstCaseConfig: rates must be positive");
  if (!(lower_bound_threshold > 0.0 && lower_bound_threshold < 1.0) ||
      !(upper_bound_threshold > 0.0 && upper_bound_threshold < 1.0))
    throw std::invalid_argument("WorstCaseConfig: thresholds outside (0,1)");
  if (!(decay_hard_projection > 0.0 && decay_hard_projection < 1.0) ||
      !(decay_plateau > 0.0 && decay_plateau < 1.0))
    throw std::invalid_argument("WorstCaseConfig: decays outside (0,1)");
}

void BoundaryConfig::validate() const {
  if (!(diversity_weight > 0.0))
    throw std::invalid_argument("BoundaryConfig: diversity_weight <= 0");
  if (steps < 1 || !(learning_rate > 0.0) || projection_budget < 1)
    throw std::invalid_argument("BoundaryConfig: bad loop constants");
}

std::size_t nearest_rank_index(double q, int n) {
  const long rank = static_cast<long>(std::ceil(q * n));
  return static_cast<std::size_t>(std::clamp<long>(rank, 1, n) - 1);
}

void mask_physical_bounds(std::span<const double> values,
                          std::span<double> gradient, double lo, double hi) {
  if (values.size() != gradient.size())
    throw std::invalid_argument("mask_physical_bounds: size mismatch");
  for (std::size_t p = 0; p < values.size(); ++p) {
    if (values[p] > hi && gradient[p] > 0.0) gradient[p] = 0.0;
    if (values[p] < lo && gradient[p] < 0.0) gradient[p] = 0.0;
  }
}

ProjectionResult project_into_set(const Image& image,
                                  const ConfidenceState& state,
                                  std::span<const Measurement> ms, int budget,
                                  double learning_rate) {
  const Projector& proj = state.projector();
  const double threshold = state.threshold();
  if (cumulative_nll(image, ms, proj) <= threshold)
    return ProjectionResult{image, true, 0};

  OptimizerConfig cfg;
  cfg.learning_rate = learning_rate;
  Image iterate = image;
  AdamState adam(iterate.pixel_count());
  Image best = iterate;
  double best_nll = std::numeric_limits<double>::infinity();
  std::vector<double> grad(iterate.pixel_count());
  for (int step = 1; step <= budget; ++step) {
    std::fill(grad.begin(), grad.end(), 0.0);
    for (const Measurement& m : ms) nll_gradient_add(iterate, m, proj, grad);
    adam_step(iterate.mutable_values(), grad, adam, cfg);
    iterate.clamp01();
    const double nll = cumulative_nll(iterate, ms, proj);
    if (nll <= threshold) return ProjectionResult{iterate, true, step};
    if (nll < best_nll) {
      best_nll = nll;
      best = iterate;
    }
  }
  return ProjectionResult{best, false, budget};
}

bool WorstCaseResult::all_in_set() const {
  for (bool b : replicate_in_set)
    if (!b) return false;
  return true;
}

namespace {

// Pairwise-summed batch mean: exact for identical inputs, so the expansion
// gradient of coincident replicates is exactly zero.
std::vector<double> raw_mean(std::span<const Image> images) {
  const std::size_t k = images.size();
  if (k == 1) return {images[0].values().begin(), images[0].values().end()};
  const std::size_t half = k / 2;
  auto left = raw_mean(images.first(half));
  const auto right = raw_mean(images.subspan(half));
  const double wl = static_cast<double>(half) / static_cast<double>(k);
  const double wr = 1.0 - wl;
  for (std::size_t p = 0; p < left.size(); ++p)
    left[p] = wl * left[p] + wr * right[p];
  return left;
}

double mean_spread(std::span<const Image> images,
                   std::span<const double> mean) {
  double total = 0.0;
  for (const Image& img : images) {
    const auto v = img.values();
    double sq = 0.0;
    for (std::size_t p = 0; p < mean.size(); ++p) {
      const double d = v[p] - mean[p];
      sq += d * d;
    }
    total += std::sqrt(sq);
  }
  return total / static_cast<double>(images.size());
}

}  // namespace

WorstCaseResult worst_case_intervals(const Image& prediction,
                                     const ConfidenceState& state,
                                     std::span<const Measurement> ms,
                                     const WorstCaseConfig& config,
                                     std::uint64_t seed) {
  config.validate();
  const Projector& proj = state.projector();
  const double threshold = state.threshold();

  auto base = project_into_set(prediction, state, ms,
                               config.projection_budget,
                               config.projection_learning_rate);

  const std::size_t k = static_cast<std::size_t>(config.replicates);
  std::vector<Image> replicates(k, base.image);
  Rng rng(seed);
  for (Image& z : replicates) {
    for (double& v : z.mutable_values()) v += config.init_noise * rng.normal();
    z.clamp01();
  }

  // the interval is the envelope of every set-verified state observed across
  // the optimized replicates, seeded with the projected prediction
  Image lower = base.image;
  Image upper = base.image;
  auto& lo = lower.mutable_values();
  auto& hi = upper.mutable_values();
  const auto fold = [&](const Image& z) {
    const auto v = z.values();
    for (std::size_t p = 0; p < v.size(); ++p) {
      lo[p] = std::min(lo[p], v[p]);
      hi[p] = std::max(hi[p], v[p]);
    }
  };

  double eta = config.step_size;
  int patience = 0;
  double prev_spread = -std::numeric_limits<double>::infinity();
  int outer = 0;
  std::vector<double> grad(base.image.pixel_count());
  std::vector<bool> in_set(k, base.converged);

  for (; outer < config.max_outer_steps; ++outer) {
    const auto mean = raw_mean(replicates);
    bool projection_was_hard = false;

    for (std::size_t r = 0; r < k; ++r) {
      Image& z = replicates[r];
      auto& zv = z.mutable_values();
      // expansion gradient away from the batch mean, masked at the physical
      // bounds, normalized to unit length
      for (std::size_t p = 0; p < zv.size(); ++p) grad[p] = zv[p] - mean[p];
      mask_physical_bounds(zv, grad, config.lower_bound_threshold,
                           config.upper_bound_threshold);
      double norm_sq = 0.0;
      for (double g : grad) norm_sq += g * g;
      if (norm_sq > 0.0) {
        const double scale = eta / std::sqrt(norm_sq);
        for (std::size_t p = 0; p < zv.size(); ++p) zv[p] += scale * grad[p];
        z.clamp01();
      }
      in_set[r] = cumulative_nll(z, ms, proj) <= threshold;
      if (!in_set[r]) {
        const auto res =
            project_into_set(z, state, ms, config.projection_budget,
                             config.projection_learning_rate);
        z = res.image;
        in_set[r] = res.converged;
        if (res.steps_used > 10) projection_was_hard = true;
      }
      if (in_set[r]) fold(z);
    }

    const auto mean_after = raw_mean(replicates);
    const double spread = mean_spread(replicates, mean_after);
    if (projection_was_hard) eta *= config.decay_hard_projection;
    if (spread - prev_spread <= config.plateau_tolerance) {
      eta *= config.decay_plateau;
      if (++patience > config.patience) {
        ++outer;
        break;
      }
    } else {
      patience = 0;
    }
    prev_spread = spread;
  }

  WorstCaseResult result;
  result.outer_steps = outer;
  result.replicate_in_set.assign(in_set.begin(), in_set.end());
  result.intervals = PixelIntervals{std::move(lower), std::move(upper)};
  result.intervals.validate();
  return result;
}

std::vector<Image> boundary_spread(std::vector<Image> samples,
                                   const ConfidenceState& state,
                                   std::span<const Measurement> ms,
                                   const BoundaryConfig& config) {
  config.validate();
  if (samples.size() < 2)
    throw std::invalid_argument("boundary_spread: needs K >= 2 samples");
  const Projector& proj = state.projector();
  const double threshold = state.threshold();
  const std::size_t k = samples.size();
  const double inv_k = 1.0 / static_cast<double>(k);
  // exact derivative of the diversity term through the batch mean
  const double c = inv_k * 2.0 * config.diversity_weight * (1.0 - inv_k);

  for (int step = 0; step < config.steps; ++step) {
    const auto mean = raw_mean(samples);
    for (std::size_t j = 0; j < k; ++j) {
      if (cumulative_nll(samples[j], ms, proj) <= threshold) {
        // in-set: the diversity term penalizes clustering around the batch
        // mean, so the update pushes away from it
        auto& v = samples[j].mutable_values();
        for (std::size_t p = 0; p < v.size(); ++p)
          v[p] += config.learning_rate * c * (v[p] - mean[p]);
        samples[j].clamp01();
      }
      // violators descend L_t(x) - threshold back into the set
      if (cumulative_nll(samples[j], ms, proj) > threshold)
        samples[j] = project_into_set(samples[j], state, ms,
                                      config.projection_budget,
                                      config.learning_rate)
                         .image;
    }
  }
  return samples;
}

PixelIntervals student_t_intervals(std::span<const Image> samples,
                                   double delta) {
  if (samples.size() < 2)
    throw std::invalid_argument("student_t_intervals: needs K >= 2 samples");
  if (!(delta > 0.0 && delta < 1.0))
    throw std::invalid_argument("student_t_intervals: delta outside (0, 1)");
  const std::size_t k = samples.size();
  const int side = samples.front().side();
  const double tq =
      student_t_quantile(1.0 - 0.5 * delta, static_cast<int>(k) - 1);
  const double scale = tq / std::sqrt(static_cast<double>(k));

  Image lower(side), upper(side);
  auto& lo = lower.mutable_values();
  auto& hi = upper.mutable_values();
  for (std::size_t p = 0; p < lo.size(); ++p) {
    double mean = 0.0;
    for (const Image& s : samples) mean += s.values()[p];
    mean /= static_cast<double>(k);
    double ss = 0.0;
    for (const Image& s : samples) {
      const double d = s.values()[p] - mean;
      ss += d * d;
    }
    const double sd = std::sqrt(ss / static_cast<double>(k - 1));
    const double half = scale * sd;
    lo[p] = clamp01(mean - half);
    hi[p] = clamp01(mean + half);
  }
  PixelIntervals out{std::move(lower), std::move(upper)};
  out.validate();
  return out;
}

PixelIntervals bootstrap_intervals(
    const std::function<Image(std::span<const Measurement>)>& reconstructor,
    std::span<const Measurement> ms, int bootstrap_count, double delta,
    std::uint64_t seed) {
  if (bootstrap_count < 2)
    throw std::invalid_argument("bootstrap_intervals: needs B >= 2");
  if (ms.empty())
    throw std::invalid_argument("bootstrap_intervals: no measurements");
  if (!(delta > 0.0 && delta < 1.0))
    throw std::invalid_argument("bootstrap_intervals: delta outside (0, 1)");

  Rng rng(seed);
  const std::size_t n = ms.size();
  std::vector<Image> recons;
  recons.reserve(bootstrap_count);
  std::vector<Measurement> resample(n);
  for (int b = 0; b < bootstrap_count; ++b) {
    for (std::size_t i = 0; i < n; ++i)
      resample[i] = ms[static_cast<std::size_t>(
          rng.uniform_int(0, static_cast<long>(n) - 1))];
    recons.push_back(reconstructor(resample));
  }

  const int side = recons.front().side();
  const std::size_t lo_idx = nearest_rank_index(0.5 * delta, bootstrap_count);
  const std::size_t hi_idx =
      nearest_rank_index(1.0 - 0.5 * delta, bootstrap_count);

  Image lower(side), upper(side);
  std::vector<double> column(bootstrap_count);
  for (std::size_t p = 0; p < lower.pixel_count(); ++p) {
    for (int b = 0; b < bootstrap_count; ++b) column[b] = recons[b].values()[p];
    std::sort(column.begin(), column.end());
    lower.mutable_values()[p] = column[lo_idx];
    upper.mutable_values()[p] = column[hi_idx];
  }
  PixelIntervals out{std::move(lower), std::move(upper)};
  out.validate();
  return out;
}

}  // namespace ctseq
