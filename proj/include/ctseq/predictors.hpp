#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "ctseq/confseq.hpp"
#include "ctseq/forward.hpp"
#include "ctseq/recon.hpp"

namespace ctseq {

/// A reconstruction method driving the mixing distribution. Stateful per run:
/// observe() consumes one acquisition step (one measurement in sparse mode, a
/// full grid in dense mode); predict() returns a mixing whose step counter
/// equals the number of observed steps, so it can legally score the next one.
class Predictor {
 public:
  virtual ~Predictor() = default;

  const std::string& name() const { return name_; }
  virtual int sample_count() const = 0;
  const Geometry& geometry() const { return proj_.geometry(); }

  void observe(std::span<const Measurement> group);
  MixingDistribution predict();

 protected:
  Predictor(std::string name, Geometry geom);

  virtual void on_observe(const Measurement& m) = 0;
  virtual std::vector<Image> make_samples() = 0;
  const Projector& projector() const { return proj_; }
  const std::vector<Measurement>& history() const { return history_; }

  /// Constant mid-gray prior used before any data has been seen.
  Image data_free_prior() const { return Image(geometry().side, 0.5); }

 private:
  std::string name_;
  Projector proj_;
  std::vector<Measurement> history_;
  int steps_observed_ = 0;
};

/// Filtered backprojection of everything observed so far (K = 1).
class FbpPredictor : public Predictor {
 public:
  explicit FbpPredictor(Geometry geom);
  int sample_count() const override { return 1; }

 protected:
  void on_observe(const Measurement& m) override;
  std::vector<Image> make_samples() override;

 private:
  FbpAccumulator acc_;
};

/// Approximate MLE (K = 1): FBP-initialized adaptive-moment minimization of
/// the cumulative NLL on the first prediction, then warm-started refinement
/// with `refine_steps` updates per acquisition step.
class MlePredictor : public Predictor {
 public:
  MlePredictor(Geometry geom, OptimizerConfig config = {},
               int refine_steps = 12);
  int sample_count() const override { return 1; }

 protected:
  void on_observe(const Measurement& m) override;
  std::vector<Image> make_samples() override;

 private:
  OptimizerConfig config_;
  int refine_steps_;
  FbpAccumulator acc_;
  std::optional<Image> iterate_;
};

/// Classical ensemble stand-in: K members with Gaussian-jittered FBP
/// initializations (sigma 0.02) and per-member smoothing strengths, both
/// derived from the member seed so equal seeds collapse to identical samples.
class EnsemblePredictor : public Predictor {
 public:
  EnsemblePredictor(Geometry geom, std::vector<std::uint64_t> seeds,
                    OptimizerConfig config = {}, int refine_steps = 12);
  int sample_count() const override { return static_cast<int>(seeds_.size()); }

 protected:
  void on_observe(const Measurement& m) override;
  std::vector<Image> make_samples() override;

 private:
  std::vector<std::uint64_t> seeds_;
  std::vector<double> blur_sigmas_;
  OptimizerConfig config_;
  int refine_steps_;
  FbpAccumulator acc_;
  std::vector<Image> iterates_;
};

/// Applies Gaussian smoothing to every sample of a wrapped predictor;
/// strength 0 is the identity.
class SmoothedPredictor : public Predictor {
 public:
  SmoothedPredictor(std::unique_ptr<Predictor> base, double strength);
  int sample_count() const override { return base_->sample_count(); }

 protected:
  void on_observe(const Measurement& m) override;
  std::vector<Image> make_samples() override;

 private:
  std::unique_ptr<Predictor> base_;
  double strength_;
};

/// Collapses a multi-sample predictor to the Dirac at its sample mean
/// (the mean-aggregation strategy the mixture is compared against).
class MeanAggregatedPredictor : public Predictor {
 public:
  explicit MeanAggregatedPredictor(std::unique_ptr<Predictor> base);
  int sample_count() const override { return 1; }

 protected:
  void on_observe(const Measurement& m) override;
  std::vector<Image> make_samples() override;

 private:
  std::unique_ptr<Predictor> base_;
};

/// Dirac at a frozen image. If no image is supplied, the first prediction
/// freezes the FBP of whatever was observed up to that point (the data-free
/// prior when nothing was). Self-prediction gives gap = log(1/delta) exactly.
class DiracPredictor : public Predictor {
 public:
  DiracPredictor(Geometry geom, std::optional<Image> image = std::nullopt);
  int sample_count() const override { return 1; }
  const Image& frozen();

 protected:
  void on_observe(const Measurement& m) override;
  std::vector<Image> make_samples() override;

 private:
  std::optional<Image> image_;
  FbpAccumulator acc_;
};

}  // namespace ctseq
