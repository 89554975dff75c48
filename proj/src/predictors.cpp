#include "ctseq/predictors.hpp"

#include <cmath>
#include <stdexcept>

#include "ctseq/rng.hpp"

namespace ctseq {

Predictor::Predictor(std::string name, Geometry geom)
    : name_(std::move(name)), proj_(geom) {}

void Predictor::observe(std::span<const Measurement> group) {
  if (group.empty())
    throw std::invalid_argument("Predictor: empty measurement group");
  for (const Measurement& m : group) {
    m.validate(geometry().side);
    history_.push_back(m);
    on_observe(m);
  }
  ++steps_observed_;
}

MixingDistribution Predictor::predict() {
  return MixingDistribution(make_samples(), steps_observed_);
}

FbpPredictor::FbpPredictor(Geometry geom)
    : Predictor("fbp", geom), acc_(projector()) {}

void FbpPredictor::on_observe(const Measurement& m) { acc_.add(m); }

std::vector<Image> FbpPredictor::make_samples() {
  if (acc_.count() == 0) return {data_free_prior()};
  return {acc_.reconstruct()};
}

MlePredictor::MlePredictor(Geometry geom, OptimizerConfig config,
                           int refine_steps)
    : Predictor("mle", geom),
      config_(config),
      refine_steps_(refine_steps),
      acc_(projector()) {
  config_.validate();
  if (refine_steps < 1)
    throw std::invalid_argument("MlePredictor: refine_steps < 1");
}

void MlePredictor::on_observe(const Measurement& m) { acc_.add(m); }

std::vector<Image> MlePredictor::make_samples() {
  if (history().empty()) return {data_free_prior()};
  if (!iterate_) {
    iterate_ = mle(history(), acc_.reconstruct(), config_, projector());
  } else {
    OptimizerConfig refine = config_;
    refine.steps = refine_steps_;
    iterate_ = mle(history(), *iterate_, refine, projector());
  }
  return {*iterate_};
}

EnsemblePredictor::EnsemblePredictor(Geometry geom,
                                     std::vector<std::uint64_t> seeds,
                                     OptimizerConfig config, int refine_steps)
    : Predictor("ensemble", geom),
      seeds_(std::move(seeds)),
      config_(config),
      refine_steps_(refine_steps),
      acc_(projector()) {
  if (seeds_.size() < 2)
    throw std::invalid_argument("EnsemblePredictor: needs K >= 2 seeds");
  config_.validate();
  // Per-member smoothing strength comes from the same seed as the jitter, so
  // identical seeds reproduce identical members.
  blur_sigmas_.reserve(seeds_.size());
  for (std::uint64_t s : seeds_) {
    Rng rng(mix_seed(s, 0x736d6f6f7468ULL));
    blur_sigmas_.push_back(rng.uniform(0.0, 1.0));
  }
}

void EnsemblePredictor::on_observe(const Measurement& m) { acc_.add(m); }

std::vector<Image> EnsemblePredictor::make_samples() {
  const std::size_t k = seeds_.size();
  std::vector<Image> samples;
  samples.reserve(k);
  if (history().empty()) {
    samples.assign(k, data_free_prior());
    return samples;
  }
  if (iterates_.empty()) {
    const Image base = acc_.reconstruct();
    iterates_.reserve(k);
    for (std::size_t j = 0; j < k; ++j) {
      Image init = base;
      Rng rng(mix_seed(seeds_[j], 0x6a6974746572ULL));
      for (double& v : init.mutable_values()) v += 0.02 * rng.normal();
      init.clamp01();
      iterates_.push_back(mle(history(), init, config_, projector()));
    }
  } else {
    OptimizerConfig refine = config_;
    refine.steps = refine_steps_;
    for (Image& it : iterates_)
      it = mle(history(), it, refine, projector());
  }
  for (std::size_t j = 0; j < k; ++j)
    samples.push_back(gaussian_smooth(iterates_[j], blur_sigmas_[j]));
  return samples;
}

SmoothedPredictor::SmoothedPredictor(std::unique_ptr<Predictor> base,
                                     double strength)
    : Predictor("smoothed_" + base->name(), base->geometry()),
      base_(std::move(base)),
      strength_(strength) {
  if (!(strength >= 0.0))
    throw std::invalid_argument("SmoothedPredictor: strength must be >= 0");
}

void SmoothedPredictor::on_observe(const Measurement& m) {
  base_->observe(std::span<const Measurement>(&m, 1));
}

std::vector<Image> SmoothedPredictor::make_samples() {
  auto samples = base_->predict().samples();
  for (Image& s : samples) s = gaussian_smooth(s, strength_);
  return samples;
}

MeanAggregatedPredictor::MeanAggregatedPredictor(
    std::unique_ptr<Predictor> base)
    : Predictor(base->name() + "_mean", base->geometry()),
      base_(std::move(base)) {}

void MeanAggregatedPredictor::on_observe(const Measurement& m) {
  base_->observe(std::span<const Measurement>(&m, 1));
}

std::vector<Image> MeanAggregatedPredictor::make_samples() {
  const auto samples = base_->predict().samples();
  Image mean(geometry().side);
  auto& vals = mean.mutable_values();
  for (const Image& s : samples) {
    const auto sv = s.values();
    for (std::size_t p = 0; p < vals.size(); ++p) vals[p] += sv[p];
  }
  const double inv_k = 1.0 / static_cast<double>(samples.size());
  for (double& v : vals) v *= inv_k;
  mean.clamp01();
  return {mean};
}

DiracPredictor::DiracPredictor(Geometry geom, std::optional<Image> image)
    : Predictor("self", geom), image_(std::move(image)), acc_(projector()) {
  if (image_ && image_->side() != geom.side)
    throw std::invalid_argument("DiracPredictor: image side mismatch");
}

void DiracPredictor::on_observe(const Measurement& m) {
  if (!image_) acc_.add(m);
}

const Image& DiracPredictor::frozen() {
  if (!image_)
    image_ = acc_.count() > 0 ? acc_.reconstruct() : data_free_prior();
  return *image_;
}

std::vector<Image> DiracPredictor::make_samples() { return {frozen()}; }

}  // namespace ctseq
