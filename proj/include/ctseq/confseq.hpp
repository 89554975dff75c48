#pragma once

#include <cmath>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ctseq/forward.hpp"
#include "ctseq/image.hpp"
#include "ctseq/likelihood.hpp"

namespace ctseq {

/// Uniform mixture of K point masses over candidate images. `step` records
/// how many acquisition steps of data the samples were allowed to depend on;
/// the confidence update refuses mixtures that are not strictly predictive.
class MixingDistribution {
 public:
  MixingDistribution(std::vector<Image> samples, int step);

  static MixingDistribution dirac(Image sample, int step) {
    std::vector<Image> s;
    s.push_back(std::move(sample));
    return MixingDistribution(std::move(s), step);
  }

  const std::vector<Image>& samples() const { return samples_; }
  int size() const { return static_cast<int>(samples_.size()); }
  int step() const { return step_; }

 private:
  std::vector<Image> samples_;
  int step_ = 0;
};

/// -log (1/K) sum_k p_{x_k}(y | angle, I0), via log-sum-exp with max
/// subtraction. Guaranteed to satisfy the sandwich
///   min_k nll_k <= increment <= min_k nll_k + log K
/// exactly in floating point.
double beta_increment(const MixingDistribution& mixing, const Measurement& m,
                      const Projector& proj);
double beta_increment(const MixingDistribution& mixing, const Measurement& m,
                      const Geometry& geom);

/// Running confidence coefficient beta_t plus the cumulative negative
/// log-likelihood of every tracked candidate. The confidence set at step t is
///   C_t = { x | L_t(x) <= beta_t + log(1/delta) }.
class ConfidenceState {
 public:
  struct Membership {
    bool member = false;
    double gap = 0.0;  // beta_t + log(1/delta) - L_t
  };

  ConfidenceState(Geometry geom, double delta, int warmup_steps = 0);

  /// Register a candidate before any update.
  void track(std::string id, Image candidate);

  /// One sparse update. The mixing must have been formed from exactly the
  /// data seen so far (warmup_steps + step() acquisition steps).
  void update(const MixingDistribution& mixing, const Measurement& m);

  /// One dense update: a group of simultaneous measurements scored by the
  /// same mixing; advances the step counter once.
  void update(const MixingDistribution& mixing,
              std::span<const Measurement> group);

  int step() const { return step_; }
  double beta() const { return beta_; }
  double delta() const { return delta_; }
  int warmup_steps() const { return warmup_; }
  double threshold() const { return beta_ + std::log(1.0 / delta_); }

  double nll(std::string_view id) const;
  Membership membership(std::string_view id) const;
  Membership membership_of_nll(double candidate_nll) const;

  const std::vector<std::string>& tracked_ids() const { return ids_; }
  const Image& candidate(std::string_view id) const;
  const Projector& projector() const { return proj_; }

 private:
  std::size_t index_of(std::string_view id) const;

  Projector proj_;
  double delta_;
  int warmup_;
  int step_ = 0;
  double beta_ = 0.0;
  std::vector<std::string> ids_;
  std::vector<Image> candidates_;
  std::vector<double> nll_;
};

/// True iff the candidate ever left the confidence set along a stored
/// (beta_t, L_t) trajectory.
bool crossover_flag(std::span<const double> beta,
                    std::span<const double> candidate_nll, double delta);

/// Numerical check of the martingale property behind the construction, for
/// 1x1 images where outcomes are enumerable. Computes E[S_t] with
/// S_t = exp(L_t(truth) - beta_t) by exhaustive enumeration of count
/// sequences, truncating each step where the Poisson tail mass is below
/// `tail_epsilon`. The mixing callback sees the history observed so far and
/// may depend on it. Returns the enumerated expectation (1 up to truncation).
double martingale_oracle(
    const Image& truth, const Geometry& geom, double intensity,
    const std::function<MixingDistribution(std::span<const Measurement>)>&
        mixing_for_history,
    int steps, double tail_epsilon);

}  // namespace ctseq
