#include "ctseq/confseq.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "ctseq/poisson.hpp"

namespace ctseq {

MixingDistribution::MixingDistribution(std::vector<Image> samples, int step)
    : samples_(std::move(samples)), step_(step) {
  if (samples_.empty())
    throw std::invalid_argument("MixingDistribution: needs at least 1 sample");
  if (step_ < 0)
    throw std::invalid_argument("MixingDistribution: negative step");
  const int side = samples_.front().side();
  for (const Image& s : samples_)
    if (s.side() != side)
      throw std::invalid_argument("MixingDistribution: mixed sample sides");
}

double beta_increment(const MixingDistribution& mixing, const Measurement& m,
                      const Projector& proj) {
  const auto& samples = mixing.samples();
  const std::size_t k = samples.size();
  if (k == 1) return nll_increment(samples[0], m, proj);

  std::vector<double> log_lik(k);
  double max_ll = -std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < k; ++j) {
    log_lik[j] = -nll_increment(samples[j], m, proj);
    max_ll = std::max(max_ll, log_lik[j]);
  }
  double sum = 0.0;
  for (double ll : log_lik) sum += std::exp(ll - max_ll);
  // -max_ll is min_k nll_k; the second term lies in [0, log K] exactly, which
  // makes the sandwich property hold without tolerance.
  return -max_ll + (std::log(static_cast<double>(k)) - std::log(sum));
}

double beta_increment(const MixingDistribution& mixing, const Measurement& m,
                      const Geometry& geom) {
  Projector proj(geom);
  return beta_increment(mixing, m, proj);
}

ConfidenceState::ConfidenceState(Geometry geom, double delta, int warmup_steps)
    : proj_(geom), delta_(delta), warmup_(warmup_steps) {
  if (!(delta > 0.0 && delta < 1.0))
    throw std::invalid_argument("ConfidenceState: delta must be in (0, 1)");
  if (warmup_steps < 0)
    throw std::invalid_argument("ConfidenceState: negative warmup");
}

void ConfidenceState::track(std::string id, Image candidate) {
  if (step_ != 0)
    throw std::logic_error("ConfidenceState: track() after updates started");
  if (candidate.side() != proj_.geometry().side)
    throw std::invalid_argument("ConfidenceState: candidate side mismatch");
  for (const std::string& existing : ids_)
    if (existing == id)
      throw std::invalid_argument("ConfidenceState: duplicate candidate id");
  ids_.push_back(std::move(id));
  candidates_.push_back(std::move(candidate));
  nll_.push_back(0.0);
}

void ConfidenceState::update(const MixingDistribution& mixing,
                             const Measurement& m) {
  update(mixing, std::span<const Measurement>(&m, 1));
}

void ConfidenceState::update(const MixingDistribution& mixing,
                             std::span<const Measurement> group) {
  if (group.empty())
    throw std::invalid_argument("ConfidenceState: empty measurement group");
  if (mixing.step() != warmup_ + step_)
    throw std::logic_error(
        "ConfidenceState: mixing step counter does not match the protocol "
        "position (prediction must precede the measurement)");
  for (const Measurement& m : group) {
    beta_ += beta_increment(mixing, m, proj_);
    for (std::size_t c = 0; c < candidates_.size(); ++c)
      nll_[c] += nll_increment(candidates_[c], m, proj_);
  }
  ++step_;
}

std::size_t ConfidenceState::index_of(std::string_view id) const {
  for (std::size_t c = 0; c < ids_.size(); ++c)
    if (ids_[c] == id) return c;
  throw std::invalid_argument("ConfidenceState: unknown candidate id");
}

double ConfidenceState::nll(std::string_view id) const {
  return nll_[index_of(id)];
}

ConfidenceState::Membership ConfidenceState::membership(
    std::string_view id) const {
  return membership_of_nll(nll_[index_of(id)]);
}

ConfidenceState::Membership ConfidenceState::membership_of_nll(
    double candidate_nll) const {
  // (beta - L) + log(1/delta): keeps the self-prediction identity exact even
  // when beta and L are large.
  const double gap = (beta_ - candidate_nll) + std::log(1.0 / delta_);
  return Membership{gap >= 0.0, gap};
}

bool crossover_flag(std::span<const double> beta,
                    std::span<const double> candidate_nll, double delta) {
  if (beta.size() != candidate_nll.size())
    throw std::invalid_argument("crossover_flag: trajectory length mismatch");
  const double log_inv_delta = std::log(1.0 / delta);
  for (std::size_t t = 0; t < beta.size(); ++t)
    if ((beta[t] - candidate_nll[t]) + log_inv_delta < 0.0) return true;
  return false;
}

namespace {

// Smallest y such that the Poisson upper tail beyond y is < eps, for every
// rate up to max_rate.
std::int64_t poisson_tail_cutoff(double max_rate, double eps) {
  const std::int64_t hi =
      static_cast<std::int64_t>(max_rate + 20.0 * std::sqrt(max_rate) + 60.0);
  std::vector<double> pmf(hi + 1);
  for (std::int64_t y = 0; y <= hi; ++y)
    pmf[y] = std::exp(poisson_log_pmf(y, max_rate));
  double tail = 0.0;
  for (std::int64_t y = hi; y >= 0; --y) {
    tail += pmf[y];
    if (tail >= eps) return std::min(y + 1, hi);
  }
  return hi;
}

struct OracleContext {
  const Image* truth;
  const Geometry* geom;
  double intensity;
  double truth_rate;
  std::int64_t y_max;
  int steps;
  const std::function<MixingDistribution(std::span<const Measurement>)>*
      mixing;
};

double enumerate_outcomes(const OracleContext& ctx,
                          std::vector<Measurement>& history, double log_weight,
                          double log_ratio) {
  const int s = static_cast<int>(history.size());
  if (s == ctx.steps) return std::exp(log_weight + log_ratio);

  const MixingDistribution mix = (*ctx.mixing)(history);
  if (mix.step() != s)
    throw std::logic_error("martingale_oracle: mixing step mismatch");

  double total = 0.0;
  Measurement m;
  m.angle = 0.0;
  m.intensity = ctx.intensity;
  m.counts.assign(1, 0);
  for (std::int64_t y = 0; y <= ctx.y_max; ++y) {
    m.counts[0] = y;
    const double w = poisson_log_pmf(y, ctx.truth_rate);
    const double inc_truth = nll_increment(*ctx.truth, m, *ctx.geom);
    const double inc_beta = beta_increment(mix, m, *ctx.geom);
    history.push_back(m);
    total += enumerate_outcomes(ctx, history, log_weight + w,
                                log_ratio + (inc_truth - inc_beta));
    history.pop_back();
  }
  return total;
}

}  // namespace

double martingale_oracle(
    const Image& truth, const Geometry& geom, double intensity,
    const std::function<MixingDistribution(std::span<const Measurement>)>&
        mixing_for_history,
    int steps, double tail_epsilon) {
  geom.validate();
  if (geom.side != 1 || truth.side() != 1)
    throw std::invalid_argument("martingale_oracle: requires 1x1 instances");
  if (steps < 1 || !(tail_epsilon > 0.0))
    throw std::invalid_argument("martingale_oracle: bad steps or epsilon");

  OracleContext ctx;
  ctx.truth = &truth;
  ctx.geom = &geom;
  ctx.intensity = intensity;
  ctx.truth_rate =
      intensity * std::exp(-geom.path_scale * truth.values()[0]);
  // Candidate rates are bounded by the intensity (pixel values are >= 0), so
  // a cutoff for rate = intensity covers every mixture component.
  ctx.y_max = poisson_tail_cutoff(intensity, tail_epsilon);
  ctx.steps = steps;
  ctx.mixing = &mixing_for_history;

  std::vector<Measurement> history;
  // S_t = exp(L_t(truth) - beta_t), accumulated along each outcome path via
  // the same increment functions the confidence sequence uses.
  return enumerate_outcomes(ctx, history, 0.0, 0.0);
}

}  // namespace ctseq
