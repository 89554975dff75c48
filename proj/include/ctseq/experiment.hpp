#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "ctseq/confseq.hpp"
#include "ctseq/io.hpp"
#include "ctseq/metrics.hpp"
#include "ctseq/phantoms.hpp"
#include "ctseq/predictors.hpp"

namespace ctseq {

/// Full description of one acquisition run. Identical configs (including
/// seeds) produce byte-identical artifacts.
struct RunConfig {
  int schema_version = 1;

  std::string family = "ellipses";
  int side = 64;
  double path_scale = 4.0;
  std::uint64_t image_seed = 1;
  std::uint64_t noise_seed = 1;

  std::string mode = "sparse";  // sparse | dense

  // sparse protocol: I_total = t_final * side * I0 fixes the per-bin I0
  double total_intensity = 1e6;
  int total_angles = 50;
  int warmup_steps = 5;
  std::string angle_schedule = "golden";  // golden | uniform_shuffled

  // dense protocol: the full grid each step, exponentially spaced step
  // intensities divided evenly over the grid
  int dense_grid = 50;
  int dense_steps = 30;
  double dense_intensity_lo = 1e4;
  double dense_intensity_hi = 1e9;
  int dense_warmup_steps = 1;

  double delta = 0.05;
  // fbp | mle | ensemble | ensemble_mean | smoothed_fbp | smoothed_mle | self
  std::string predictor = "mle";
  int ensemble_size = 8;
  double smoothing = 1.0;

  int mle_steps = 100;
  int mle_refine_steps = 12;
  double mle_learning_rate = 1e-2;

  // rotated copies of the truth tracked from step 1 (degrees)
  std::vector<double> rotation_angles;

  // per-step membership/PSNR audit of the mixing samples
  bool track_sample_membership = false;

  void validate() const;
  nlohmann::json to_json() const;
  static RunConfig from_json(const nlohmann::json& j);

  Geometry geometry() const { return Geometry{side, path_scale}; }
  int confidence_steps() const;
  double per_bin_intensity() const;  // sparse mode
  bool sparse() const { return mode == "sparse"; }
};

/// The paper-scale preset (r = 128 reconstructed from 256, 200 angles, 10
/// warmup); the defaults above are the desk-scale configuration.
RunConfig paper_scale_preset();

struct SampleAudit {
  int step = 0;
  bool out_of_set = false;
  double psnr_vs_truth = 0.0;
};

struct RunOutput {
  RunConfig config;
  Image truth;
  std::vector<Measurement> measurements;  // warmup groups first
  int group_size = 1;
  Trajectory trajectory;
  StoredTrajectory gt_trajectory;
  Image final_recon;                 // mean of the final mixing samples
  std::vector<Image> final_samples;  // the final mixing itself
  std::optional<ConfidenceState> state;
  bool crossover = false;
  double final_gap = 0.0;  // beta - L(truth) at the final step
  std::vector<double> mean_aggregation_beta;  // only when K > 1
  std::vector<SampleAudit> sample_audit;

  /// Measurements the confidence sequence actually scored (post warmup).
  std::span<const Measurement> confidence_measurements() const;
};

/// Executes the configured protocol: simulate, warm up the predictor on the
/// reserved steps, then run the confidence sequence over the remaining
/// horizon with strictly predictive mixings.
RunOutput run_acquisition(const RunConfig& config);

std::unique_ptr<Predictor> make_predictor(const RunConfig& config);

void write_run(const std::filesystem::path& dir, const RunOutput& out);

struct ReplayReport {
  bool ok = false;
  double max_beta_deviation = 0.0;
  double max_nll_deviation = 0.0;
  int steps = 0;
};

/// Recomputes the trajectory of a written run from its measurement log alone
/// and compares against the stored trajectory.
ReplayReport replay_run(const std::filesystem::path& dir);

struct SweepConfig {
  RunConfig base;
  std::vector<std::string> families = {"ellipses"};
  std::vector<double> intensities = {1e4, 1e6, 1e8};
  std::vector<std::string> predictors = {"fbp", "mle"};
  std::vector<std::uint64_t> image_seeds = {1, 2, 3, 4};
  std::vector<std::uint64_t> noise_seeds = {1};
  std::vector<double> calibration_deltas;
  int threads = 2;
  bool write_cells = true;

  nlohmann::json to_json() const;
  static SweepConfig from_json(const nlohmann::json& j);
};

struct SweepResult {
  int total_cells = 0;
  int failed_cells = 0;
};

/// Runs the grid (parallel across cells, shared measurement streams across
/// predictors in the same cell family/seed/intensity), writes per-cell
/// artifacts plus the aggregated metric tables.
SweepResult run_sweep(const SweepConfig& config,
                      const std::filesystem::path& outdir);

/// Per-figure tables and greyscale maps from a completed run directory.
/// Missing artifacts are listed in the returned report, not fatal.
std::vector<std::string> export_run(const std::filesystem::path& run_dir,
                                    const std::filesystem::path& outdir,
                                    double white_point = 0.0);

}  // namespace ctseq
