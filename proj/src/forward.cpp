#include "ctseq/forward.hpp"

#include <cmath>
#include <stdexcept>

#include "ctseq/poisson.hpp"
#include "ctseq/rng.hpp"

namespace ctseq {

void Measurement::validate(int side) const {
  if (!(angle >= 0.0 && angle < 180.0))
    throw std::invalid_argument("Measurement: angle must lie in [0, 180)");
  if (!(intensity > 0.0) || !std::isfinite(intensity))
    throw std::invalid_argument("Measurement: intensity must be > 0");
  if (counts.size() != static_cast<std::size_t>(side))
    throw std::invalid_argument("Measurement: counts length != side");
  for (std::int64_t c : counts)
    if (c < 0) throw std::invalid_argument("Measurement: negative count");
}

namespace {

std::vector<double> means_from_integrals(std::vector<double> integrals,
                                         double intensity) {
  if (!(intensity > 0.0) || !std::isfinite(intensity))
    throw std::invalid_argument("mean_counts: intensity must be > 0");
  for (double& v : integrals) v = intensity * std::exp(-v);
  return integrals;
}

}  // namespace

std::vector<double> mean_counts(const Image& image, double angle_deg,
                                double intensity, const Geometry& geom) {
  return means_from_integrals(radon_project(image, angle_deg, geom),
                              intensity);
}

std::vector<double> mean_counts(const Image& image, double angle_deg,
                                double intensity, const Projector& proj) {
  return means_from_integrals(proj.project(image, angle_deg), intensity);
}

std::vector<std::int64_t> sample_counts(std::span<const double> means,
                                        std::uint64_t seed) {
  Rng rng(seed);
  std::vector<std::int64_t> counts(means.size());
  for (std::size_t i = 0; i < means.size(); ++i)
    counts[i] = poisson_sample(rng, means[i]);
  return counts;
}

Measurement simulate_step(const Image& truth_highres, double angle_deg,
                          double intensity, std::uint64_t seed,
                          const Geometry& target_geom) {
  target_geom.validate();
  if (truth_highres.side() != 2 * target_geom.side)
    throw std::invalid_argument(
        "simulate_step: truth side must be twice the target side");
  const Geometry hi{2 * target_geom.side, target_geom.path_scale};
  const auto hi_means =
      mean_counts(truth_highres, angle_deg, 0.5 * intensity, hi);
  const auto hi_counts = sample_counts(hi_means, seed);
  Measurement m;
  m.angle = angle_deg;
  m.intensity = intensity;
  m.counts.resize(target_geom.side);
  for (int i = 0; i < target_geom.side; ++i)
    m.counts[i] = hi_counts[2 * i] + hi_counts[2 * i + 1];
  return m;
}

void AcquisitionPlan::validate() const {
  if (total_steps() < 1)
    throw std::invalid_argument("AcquisitionPlan: no steps");
  if (warmup_steps < 0 || warmup_steps >= total_steps())
    throw std::invalid_argument(
        "AcquisitionPlan: warmup_steps must be < total steps");
  for (double a : angles)
    if (!(a >= 0.0 && a < 180.0))
      throw std::invalid_argument("AcquisitionPlan: angle outside [0, 180)");
  for (double v : intensities)
    if (!(v > 0.0))
      throw std::invalid_argument("AcquisitionPlan: intensity must be > 0");
  if (mode == Mode::kSparse) {
    if (intensities.size() != angles.size())
      throw std::invalid_argument(
          "AcquisitionPlan: sparse mode needs one intensity per angle");
    for (double v : intensities)
      if (v != intensities.front())
        throw std::invalid_argument(
            "AcquisitionPlan: sparse mode uses a constant intensity");
  } else {
    if (angles.empty())
      throw std::invalid_argument("AcquisitionPlan: dense mode needs a grid");
  }
}

std::vector<double> golden_angle_schedule(int n) {
  constexpr double kGolden = 137.50776405003785;  // 180 * (3 - sqrt(5))...
  std::vector<double> out(n);
  for (int k = 0; k < n; ++k) out[k] = std::fmod(k * kGolden, 180.0);
  return out;
}

std::vector<double> uniform_angle_grid(int n) {
  std::vector<double> out(n);
  for (int k = 0; k < n; ++k) out[k] = 180.0 * k / n;
  return out;
}

std::vector<double> shuffled_uniform_schedule(int n, std::uint64_t seed) {
  auto out = uniform_angle_grid(n);
  Rng rng(seed);
  for (int i = n - 1; i > 0; --i) {
    const long j = rng.uniform_int(0, i);
    std::swap(out[i], out[j]);
  }
  return out;
}

std::vector<double> exponential_intensity_grid(double lo, double hi,
                                               int steps) {
  if (steps < 2 || !(lo > 0.0) || !(hi > lo))
    throw std::invalid_argument("exponential_intensity_grid: bad arguments");
  std::vector<double> out(steps);
  const double log_lo = std::log10(lo);
  const double log_hi = std::log10(hi);
  for (int t = 0; t < steps; ++t)
    out[t] = std::pow(10.0, log_lo + (log_hi - log_lo) * t / (steps - 1));
  return out;
}

AcquisitionPlan make_sparse_plan(std::vector<double> angles,
                                 double per_bin_intensity, int warmup_steps) {
  AcquisitionPlan plan;
  plan.mode = AcquisitionPlan::Mode::kSparse;
  plan.intensities.assign(angles.size(), per_bin_intensity);
  plan.angles = std::move(angles);
  plan.warmup_steps = warmup_steps;
  plan.validate();
  return plan;
}

AcquisitionPlan make_dense_plan(int grid_size,
                                std::vector<double> step_intensities,
                                int warmup_steps) {
  AcquisitionPlan plan;
  plan.mode = AcquisitionPlan::Mode::kDense;
  plan.angles = uniform_angle_grid(grid_size);
  plan.intensities = std::move(step_intensities);
  plan.warmup_steps = warmup_steps;
  plan.validate();
  return plan;
}

}  // namespace ctseq
