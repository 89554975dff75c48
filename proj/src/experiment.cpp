#include "ctseq/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "ctseq/likelihood.hpp"
#include "ctseq/recon.hpp"
#include "ctseq/rng.hpp"

namespace ctseq {

namespace {

std::string format_g(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%g", v);
  return buf;
}

Image mean_of(std::span<const Image> samples) {
  Image mean(samples.front().side());
  auto& vals = mean.mutable_values();
  for (const Image& s : samples) {
    const auto sv = s.values();
    for (std::size_t p = 0; p < vals.size(); ++p) vals[p] += sv[p];
  }
  const double inv_k = 1.0 / static_cast<double>(samples.size());
  for (double& v : vals) v *= inv_k;
  mean.clamp01();
  return mean;
}

template <typename T>
T require_field(const nlohmann::json& j, const char* key) {
  if (!j.contains(key))
    throw std::invalid_argument(std::string("config: missing field '") + key +
                                "'");
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw std::invalid_argument(std::string("config: bad value for field '") +
                                key + "'");
  }
}

template <typename T>
void optional_field(const nlohmann::json& j, const char* key, T& target) {
  if (!j.contains(key)) return;
  try {
    target = j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw std::invalid_argument(std::string("config: bad value for field '") +
                                key + "'");
  }
}

}  // namespace

void RunConfig::validate() const {
  const auto fail = [](const std::string& field, const std::string& why) {
    throw std::invalid_argument("config field '" + field + "': " + why);
  };
  if (schema_version != 1) fail("schema_version", "unsupported version");
  phantom_family_from_name(family);  // throws on unknown family
  if (side < 16) fail("side", "must be >= 16");
  if (!(path_scale > 0.0)) fail("path_scale", "must be > 0");
  if (mode != "sparse" && mode != "dense") fail("mode", "sparse or dense");
  if (sparse()) {
    if (!(total_intensity > 0.0)) fail("total_intensity", "must be > 0");
    if (total_angles < 2) fail("total_angles", "must be >= 2");
    if (warmup_steps < 0 || warmup_steps >= total_angles)
      fail("warmup_steps", "must be in [0, total_angles)");
    if (angle_schedule != "golden" && angle_schedule != "uniform_shuffled")
      fail("angle_schedule", "golden or uniform_shuffled");
  } else {
    if (dense_grid < 1) fail("dense_grid", "must be >= 1");
    if (dense_steps < 2) fail("dense_steps", "must be >= 2");
    if (!(dense_intensity_lo > 0.0) ||
        !(dense_intensity_hi > dense_intensity_lo))
      fail("dense_intensity_lo", "need 0 < lo < hi");
    if (dense_warmup_steps < 0 || dense_warmup_steps >= dense_steps)
      fail("dense_warmup_steps", "must be in [0, dense_steps)");
  }
  if (!(delta > 0.0 && delta < 1.0)) fail("delta", "must be in (0, 1)");
  static const char* kPredictors[] = {"fbp",           "mle",
                                      "ensemble",      "ensemble_mean",
                                      "smoothed_fbp",  "smoothed_mle",
                                      "self"};
  bool known = false;
  for (const char* p : kPredictors) known = known || predictor == p;
  if (!known) fail("predictor", "unknown predictor '" + predictor + "'");
  if (ensemble_size < 2) fail("ensemble_size", "must be >= 2");
  if (!(smoothing >= 0.0)) fail("smoothing", "must be >= 0");
  if (mle_steps < 1) fail("mle_steps", "must be >= 1");
  if (mle_refine_steps < 1) fail("mle_refine_steps", "must be >= 1");
  if (!(mle_learning_rate > 0.0)) fail("mle_learning_rate", "must be > 0");
  for (double a : rotation_angles)
    if (std::fabs(a) > 45.0) fail("rotation_angles", "|angle| must be <= 45");
}

int RunConfig::confidence_steps() const {
  return sparse() ? total_angles - warmup_steps
                  : dense_steps - dense_warmup_steps;
}

double RunConfig::per_bin_intensity() const {
  return total_intensity / (static_cast<double>(confidence_steps()) * side);
}

nlohmann::json RunConfig::to_json() const {
  nlohmann::json j;
  j["schema_version"] = schema_version;
  j["family"] = family;
  j["side"] = side;
  j["path_scale"] = path_scale;
  j["image_seed"] = image_seed;
  j["noise_seed"] = noise_seed;
  j["mode"] = mode;
  j["total_intensity"] = total_intensity;
  j["total_angles"] = total_angles;
  j["warmup_steps"] = warmup_steps;
  j["angle_schedule"] = angle_schedule;
  j["dense_grid"] = dense_grid;
  j["dense_steps"] = dense_steps;
  j["dense_intensity_lo"] = dense_intensity_lo;
  j["dense_intensity_hi"] = dense_intensity_hi;
  j["dense_warmup_steps"] = dense_warmup_steps;
  j["delta"] = delta;
  j["predictor"] = predictor;
  j["ensemble_size"] = ensemble_size;
  j["smoothing"] = smoothing;
  j["mle_steps"] = mle_steps;
  j["mle_refine_steps"] = mle_refine_steps;
  j["mle_learning_rate"] = mle_learning_rate;
  j["rotation_angles"] = rotation_angles;
  j["track_sample_membership"] = track_sample_membership;
  return j;
}

RunConfig RunConfig::from_json(const nlohmann::json& j) {
  RunConfig c;
  c.schema_version = require_field<int>(j, "schema_version");
  optional_field(j, "family", c.family);
  optional_field(j, "side", c.side);
  optional_field(j, "path_scale", c.path_scale);
  optional_field(j, "image_seed", c.image_seed);
  optional_field(j, "noise_seed", c.noise_seed);
  optional_field(j, "mode", c.mode);
  optional_field(j, "total_intensity", c.total_intensity);
  optional_field(j, "total_angles", c.total_angles);
  optional_field(j, "warmup_steps", c.warmup_steps);
  optional_field(j, "angle_schedule", c.angle_schedule);
  optional_field(j, "dense_grid", c.dense_grid);
  optional_field(j, "dense_steps", c.dense_steps);
  optional_field(j, "dense_intensity_lo", c.dense_intensity_lo);
  optional_field(j, "dense_intensity_hi", c.dense_intensity_hi);
  optional_field(j, "dense_warmup_steps", c.dense_warmup_steps);
  optional_field(j, "delta", c.delta);
  optional_field(j, "predictor", c.predictor);
  optional_field(j, "ensemble_size", c.ensemble_size);
  optional_field(j, "smoothing", c.smoothing);
  optional_field(j, "mle_steps", c.mle_steps);
  optional_field(j, "mle_refine_steps", c.mle_refine_steps);
  optional_field(j, "mle_learning_rate", c.mle_learning_rate);
  optional_field(j, "rotation_angles", c.rotation_angles);
  optional_field(j, "track_sample_membership", c.track_sample_membership);
  c.validate();
  return c;
}

RunConfig paper_scale_preset() {
  RunConfig c;
  c.side = 128;
  c.total_angles = 200;
  c.warmup_steps = 10;
  c.dense_grid = 200;
  return c;
}

std::span<const Measurement> RunOutput::confidence_measurements() const {
  const int warmup =
      config.sparse() ? config.warmup_steps : config.dense_warmup_steps;
  return std::span<const Measurement>(measurements)
      .subspan(static_cast<std::size_t>(warmup) * group_size);
}

std::unique_ptr<Predictor> make_predictor(const RunConfig& cfg) {
  const Geometry geom = cfg.geometry();
  OptimizerConfig opt;
  opt.steps = cfg.mle_steps;
  opt.learning_rate = cfg.mle_learning_rate;

  const auto make_ensemble = [&]() {
    std::vector<std::uint64_t> seeds;
    seeds.reserve(cfg.ensemble_size);
    for (int k = 0; k < cfg.ensemble_size; ++k)
      seeds.push_back(mix_seed(cfg.image_seed, cfg.noise_seed, 1000 + k));
    return std::make_unique<EnsemblePredictor>(geom, std::move(seeds), opt,
                                               cfg.mle_refine_steps);
  };

  if (cfg.predictor == "fbp") return std::make_unique<FbpPredictor>(geom);
  if (cfg.predictor == "mle")
    return std::make_unique<MlePredictor>(geom, opt, cfg.mle_refine_steps);
  if (cfg.predictor == "ensemble") return make_ensemble();
  if (cfg.predictor == "ensemble_mean")
    return std::make_unique<MeanAggregatedPredictor>(make_ensemble());
  if (cfg.predictor == "smoothed_fbp")
    return std::make_unique<SmoothedPredictor>(
        std::make_unique<FbpPredictor>(geom), cfg.smoothing);
  if (cfg.predictor == "smoothed_mle")
    return std::make_unique<SmoothedPredictor>(
        std::make_unique<MlePredictor>(geom, opt, cfg.mle_refine_steps),
        cfg.smoothing);
  if (cfg.predictor == "self") return std::make_unique<DiracPredictor>(geom);
  throw std::invalid_argument("unknown predictor: " + cfg.predictor);
}

namespace {

std::vector<Measurement> simulate_measurements(const RunConfig& cfg,
                                               const Image& truth_highres) {
  const Geometry geom = cfg.geometry();
  // The stream seed deliberately excludes the predictor so every method
  // scores exactly the same observation sequence.
  const std::uint64_t stream = mix_seed(cfg.noise_seed, cfg.image_seed);
  std::vector<Measurement> ms;
  if (cfg.sparse()) {
    const auto angles =
        cfg.angle_schedule == "golden"
            ? golden_angle_schedule(cfg.total_angles)
            : shuffled_uniform_schedule(cfg.total_angles,
                                        mix_seed(stream, 0x5a5aULL));
    const double intensity = cfg.per_bin_intensity();
    ms.reserve(angles.size());
    for (std::size_t k = 0; k < angles.size(); ++k)
      ms.push_back(simulate_step(truth_highres, angles[k], intensity,
                                 mix_seed(stream, k), geom));
  } else {
    const auto grid = uniform_angle_grid(cfg.dense_grid);
    const auto step_intensity = exponential_intensity_grid(
        cfg.dense_intensity_lo, cfg.dense_intensity_hi, cfg.dense_steps);
    ms.reserve(static_cast<std::size_t>(cfg.dense_steps) * cfg.dense_grid);
    for (int t = 0; t < cfg.dense_steps; ++t) {
      const double per_angle = step_intensity[t] / cfg.dense_grid;
      for (int j = 0; j < cfg.dense_grid; ++j)
        ms.push_back(simulate_step(truth_highres, grid[j], per_angle,
                                   mix_seed(stream, t, j), geom));
    }
  }
  return ms;
}

RunOutput run_with_measurements(const RunConfig& cfg,
                                std::vector<Measurement> measurements,
                                Image truth) {
  cfg.validate();
  const Geometry geom = cfg.geometry();
  const int group_size = cfg.sparse() ? 1 : cfg.dense_grid;
  const int warmup = cfg.sparse() ? cfg.warmup_steps : cfg.dense_warmup_steps;
  const int total_groups =
      static_cast<int>(measurements.size()) / group_size;
  if (measurements.size() !=
      static_cast<std::size_t>(total_groups) * group_size)
    throw std::invalid_argument("measurement count does not tile into groups");
  if (total_groups <= warmup)
    throw std::invalid_argument("no confidence steps after warmup");

  auto predictor = make_predictor(cfg);
  ConfidenceState state(geom, cfg.delta, warmup);
  const std::span<const Measurement> all(measurements);

  for (int g = 0; g < warmup; ++g)
    predictor->observe(
        all.subspan(static_cast<std::size_t>(g) * group_size, group_size));

  if (auto* dirac = dynamic_cast<DiracPredictor*>(predictor.get()))
    state.track("self", dirac->frozen());
  state.track("truth", truth);
  for (double a : cfg.rotation_angles)
    state.track("rot_" + format_g(a), rotate_image(truth, a));

  RunOutput out;
  out.config = cfg;
  out.truth = std::move(truth);
  out.group_size = group_size;

  Trajectory& traj = out.trajectory;
  traj.delta = cfg.delta;
  traj.candidate_ids = state.tracked_ids();
  traj.candidate_nll.resize(traj.candidate_ids.size());
  traj.member.resize(traj.candidate_ids.size());

  double mean_beta = 0.0;
  const int csteps = total_groups - warmup;
  for (int t = 0; t < csteps; ++t) {
    const auto group = all.subspan(
        static_cast<std::size_t>(warmup + t) * group_size, group_size);
    const MixingDistribution mixing = predictor->predict();
    state.update(mixing, group);

    traj.step.push_back(t + 1);
    traj.beta.push_back(state.beta());
    traj.threshold.push_back(state.threshold());
    for (std::size_t c = 0; c < traj.candidate_ids.size(); ++c) {
      traj.candidate_nll[c].push_back(state.nll(traj.candidate_ids[c]));
      traj.member[c].push_back(state.membership(traj.candidate_ids[c]).member);
    }

    if (mixing.size() > 1) {
      const Image mean = mean_of(mixing.samples());
      for (const Measurement& m : group)
        mean_beta += nll_increment(mean, m, state.projector());
      out.mean_aggregation_beta.push_back(mean_beta);
    }

    if (cfg.track_sample_membership) {
      const auto scored = all.subspan(
          static_cast<std::size_t>(warmup) * group_size,
          static_cast<std::size_t>(t + 1) * group_size);
      for (const Image& sample : mixing.samples()) {
        SampleAudit audit;
        audit.step = t + 1;
        audit.out_of_set =
            !state
                 .membership_of_nll(
                     cumulative_nll(sample, scored, state.projector()))
                 .member;
        audit.psnr_vs_truth = psnr(sample, out.truth);
        out.sample_audit.push_back(audit);
      }
    }

    predictor->observe(group);
  }

  const auto final_mixing = predictor->predict();
  out.final_samples = final_mixing.samples();
  out.final_recon = mean_of(out.final_samples);

  const std::size_t truth_idx =
      static_cast<std::size_t>(std::find(traj.candidate_ids.begin(),
                                         traj.candidate_ids.end(), "truth") -
                               traj.candidate_ids.begin());
  out.gt_trajectory.beta = traj.beta;
  out.gt_trajectory.truth_nll = traj.candidate_nll[truth_idx];
  out.crossover = crossover_flag(out.gt_trajectory.beta,
                                 out.gt_trajectory.truth_nll, cfg.delta);
  out.final_gap =
      traj.beta.back() - out.gt_trajectory.truth_nll.back();
  out.measurements = std::move(measurements);
  out.state.emplace(std::move(state));
  return out;
}

}  // namespace

RunOutput run_acquisition(const RunConfig& cfg) {
  cfg.validate();
  const auto family = phantom_family_from_name(cfg.family);
  Image truth = make_phantom(family, cfg.side, cfg.image_seed);
  const Image truth_hi = make_phantom(family, 2 * cfg.side, cfg.image_seed);
  auto ms = simulate_measurements(cfg, truth_hi);
  return run_with_measurements(cfg, std::move(ms), std::move(truth));
}

void write_run(const std::filesystem::path& dir, const RunOutput& out) {
  std::filesystem::create_directories(dir);
  {
    std::ofstream f(dir / "config.json", std::ios::trunc);
    f << out.config.to_json().dump(2) << "\n";
  }
  write_measurement_log(dir / "measurements.jsonl", out.measurements);
  write_trajectory_csv(dir / "trajectory.csv", out.trajectory);

  nlohmann::json prov;
  prov["family"] = out.config.family;
  prov["image_seed"] = out.config.image_seed;
  write_image_file(dir / "truth", out.truth, prov);
  prov["predictor"] = out.config.predictor;
  prov["step"] = out.trajectory.step.empty() ? 0 : out.trajectory.step.back();
  write_image_file(dir / "recon", out.final_recon, prov);

  CsvWriter metrics({"family", "intensity", "predictor", "image_seed",
                     "noise_seed", "psnr", "final_gap", "crossover"});
  metrics.add_row({out.config.family, CsvWriter::format(out.config.total_intensity),
                   out.config.predictor,
                   std::to_string(out.config.image_seed),
                   std::to_string(out.config.noise_seed),
                   CsvWriter::format(psnr(out.final_recon, out.truth)),
                   CsvWriter::format(out.final_gap),
                   out.crossover ? "1" : "0"});
  metrics.write(dir / "metrics.csv");

  if (!out.mean_aggregation_beta.empty()) {
    CsvWriter mm({"t", "beta_mix", "beta_mean"});
    for (std::size_t t = 0; t < out.mean_aggregation_beta.size(); ++t)
      mm.add_row({CsvWriter::format(out.trajectory.step[t]),
                  CsvWriter::format(out.trajectory.beta[t]),
                  CsvWriter::format(out.mean_aggregation_beta[t])});
    mm.write(dir / "mean_vs_mix.csv");
  }

  if (!out.sample_audit.empty()) {
    CsvWriter audit({"t", "out_of_set", "psnr"});
    for (const SampleAudit& a : out.sample_audit)
      audit.add_row({CsvWriter::format(a.step), a.out_of_set ? "1" : "0",
                     CsvWriter::format(a.psnr_vs_truth)});
    audit.write(dir / "sample_audit.csv");
  }
}

ReplayReport replay_run(const std::filesystem::path& dir) {
  std::ifstream f(dir / "config.json");
  if (!f) throw std::runtime_error("replay: missing config.json");
  const auto cfg = RunConfig::from_json(nlohmann::json::parse(f));
  auto ms = read_measurement_log(dir / "measurements.jsonl");
  Image truth =
      make_phantom(phantom_family_from_name(cfg.family), cfg.side,
                   cfg.image_seed);
  const auto rebuilt = run_with_measurements(cfg, std::move(ms), std::move(truth));
  const auto stored = read_trajectory_csv(dir / "trajectory.csv");

  ReplayReport report;
  report.steps = static_cast<int>(stored.step.size());
  if (stored.step.size() != rebuilt.trajectory.step.size() ||
      stored.candidate_ids != rebuilt.trajectory.candidate_ids)
    return report;  // ok stays false
  double beta_dev = 0.0, nll_dev = 0.0;
  for (std::size_t t = 0; t < stored.beta.size(); ++t)
    beta_dev = std::max(beta_dev,
                        std::fabs(stored.beta[t] - rebuilt.trajectory.beta[t]));
  for (std::size_t c = 0; c < stored.candidate_ids.size(); ++c)
    for (std::size_t t = 0; t < stored.beta.size(); ++t)
      nll_dev = std::max(nll_dev,
                         std::fabs(stored.candidate_nll[c][t] -
                                   rebuilt.trajectory.candidate_nll[c][t]));
  report.max_beta_deviation = beta_dev;
  report.max_nll_deviation = nll_dev;
  report.ok = beta_dev <= 1e-9 && nll_dev <= 1e-9;
  return report;
}

nlohmann::json SweepConfig::to_json() const {
  nlohmann::json j;
  j["base"] = base.to_json();
  j["families"] = families;
  j["intensities"] = intensities;
  j["predictors"] = predictors;
  j["image_seeds"] = image_seeds;
  j["noise_seeds"] = noise_seeds;
  j["calibration_deltas"] = calibration_deltas;
  j["threads"] = threads;
  j["write_cells"] = write_cells;
  return j;
}

SweepConfig SweepConfig::from_json(const nlohmann::json& j) {
  SweepConfig c;
  if (j.contains("base")) c.base = RunConfig::from_json(j.at("base"));
  optional_field(j, "families", c.families);
  optional_field(j, "intensities", c.intensities);
  optional_field(j, "predictors", c.predictors);
  optional_field(j, "image_seeds", c.image_seeds);
  optional_field(j, "noise_seeds", c.noise_seeds);
  optional_field(j, "calibration_deltas", c.calibration_deltas);
  optional_field(j, "threads", c.threads);
  optional_field(j, "write_cells", c.write_cells);
  return c;
}

namespace {

struct CellResult {
  RunConfig config;
  std::string name;
  bool ok = false;
  std::string error;
  double psnr_value = 0.0;
  double final_gap = 0.0;
  bool crossover = false;
  StoredTrajectory gt;
  std::vector<std::pair<double, bool>> exclusion;  // (angle, excluded)
  double mean_minus_mix_beta = 0.0;
  bool has_mean_mix = false;
  std::vector<SampleAudit> audit;
};

struct GroupStats {
  double mean = 0.0;
  double sem = 0.0;
  int n = 0;
};

GroupStats stats_of(const std::vector<double>& xs) {
  GroupStats g;
  g.n = static_cast<int>(xs.size());
  if (xs.empty()) return g;
  double sum = 0.0;
  for (double x : xs) sum += x;
  g.mean = sum / g.n;
  if (g.n > 1) {
    double ss = 0.0;
    for (double x : xs) ss += (x - g.mean) * (x - g.mean);
    g.sem = std::sqrt(ss / (g.n - 1)) / std::sqrt(static_cast<double>(g.n));
  }
  return g;
}

}  // namespace

SweepResult run_sweep(const SweepConfig& sweep,
                      const std::filesystem::path& outdir) {
  if (sweep.base.mode != "sparse")
    throw std::invalid_argument("run_sweep: base config must be sparse mode");
  std::filesystem::create_directories(outdir);
  {
    std::ofstream f(outdir / "sweep_config.json", std::ios::trunc);
    f << sweep.to_json().dump(2) << "\n";
  }

  std::vector<RunConfig> cells;
  for (const auto& family : sweep.families)
    for (double intensity : sweep.intensities)
      for (const auto& predictor : sweep.predictors)
        for (std::uint64_t is : sweep.image_seeds)
          for (std::uint64_t ns : sweep.noise_seeds) {
            RunConfig c = sweep.base;
            c.family = family;
            c.total_intensity = intensity;
            c.predictor = predictor;
            c.image_seed = is;
            c.noise_seed = ns;
            c.validate();
            cells.push_back(std::move(c));
          }

  std::vector<CellResult> results(cells.size());
  std::atomic<std::size_t> next{0};
  const int worker_count =
      std::max(1, std::min<int>(sweep.threads,
                                static_cast<int>(cells.size())));

  const auto worker = [&]() {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= cells.size()) return;
      CellResult& r = results[i];
      r.config = cells[i];
      r.name = r.config.family + "_i" + format_g(r.config.total_intensity) +
               "_p" + r.config.predictor + "_s" +
               std::to_string(r.config.image_seed) + "_n" +
               std::to_string(r.config.noise_seed);
      try {
        const RunOutput out = run_acquisition(r.config);
        if (sweep.write_cells) write_run(outdir / "cells" / r.name, out);
        r.psnr_value = psnr(out.final_recon, out.truth);
        r.final_gap = out.final_gap;
        r.crossover = out.crossover;
        r.gt = out.gt_trajectory;
        r.audit = out.sample_audit;
        for (std::size_t c = 0; c < out.trajectory.candidate_ids.size(); ++c) {
          const auto& id = out.trajectory.candidate_ids[c];
          if (id.rfind("rot_", 0) == 0)
            r.exclusion.emplace_back(std::stod(id.substr(4)),
                                     !out.trajectory.member[c].back());
        }
        if (!out.mean_aggregation_beta.empty()) {
          r.has_mean_mix = true;
          r.mean_minus_mix_beta =
              out.mean_aggregation_beta.back() - out.trajectory.beta.back();
        }
        r.ok = true;
      } catch (const std::exception& e) {
        r.ok = false;
        r.error = e.what();
      }
    }
  };

  std::vector<std::thread> pool;
  pool.reserve(worker_count);
  for (int w = 0; w < worker_count; ++w) pool.emplace_back(worker);
  for (auto& t : pool) t.join();

  // per-cell status + metric rows (deterministic order: grid order)
  CsvWriter cell_table({"cell", "status", "error"});
  CsvWriter metrics({"family", "intensity", "predictor", "image_seed",
                     "noise_seed", "psnr", "final_gap", "crossover"});
  int failed = 0;
  for (const CellResult& r : results) {
    cell_table.add_row({r.name, r.ok ? "ok" : "failed", r.error});
    if (!r.ok) {
      ++failed;
      continue;
    }
    metrics.add_row(
        {r.config.family, CsvWriter::format(r.config.total_intensity),
         r.config.predictor, std::to_string(r.config.image_seed),
         std::to_string(r.config.noise_seed), CsvWriter::format(r.psnr_value),
         CsvWriter::format(r.final_gap), r.crossover ? "1" : "0"});
  }
  cell_table.write(outdir / "cells.csv");
  metrics.write(outdir / "metrics.csv");

  // aggregate per (family, intensity, predictor), preserving grid order
  struct Key {
    std::string family;
    double intensity;
    std::string predictor;
    bool operator==(const Key&) const = default;
  };
  std::vector<Key> keys;
  const auto key_index = [&](const Key& k) {
    for (std::size_t i = 0; i < keys.size(); ++i)
      if (keys[i] == k) return i;
    keys.push_back(k);
    return keys.size() - 1;
  };
  std::vector<std::vector<const CellResult*>> groups;
  for (const CellResult& r : results) {
    if (!r.ok) continue;
    const std::size_t i =
        key_index(Key{r.config.family, r.config.total_intensity,
                      r.config.predictor});
    if (i >= groups.size()) groups.resize(i + 1);
    groups[i].push_back(&r);
  }

  CsvWriter tightness(
      {"family", "intensity", "predictor", "mean_gap", "sem_gap", "n"});
  CsvWriter rates({"family", "intensity", "predictor", "crossover_rate",
                   "crossover_sem", "n"});
  CsvWriter calibration(
      {"family", "intensity", "predictor", "delta", "rate", "sem"});
  CsvWriter exclusion({"family", "intensity", "predictor", "rotation_angle",
                       "exclusion_rate", "sem", "n"});
  CsvWriter mean_mix({"family", "intensity", "predictor",
                      "mean_beta_minus_mix_beta", "sem", "n"});
  CsvWriter hallucination({"family", "intensity", "predictor", "flag_rate",
                           "psnr_in_set", "psnr_out_of_set", "n_samples"});
  bool any_exclusion = false, any_mean_mix = false, any_audit = false;

  std::vector<double> deltas = sweep.calibration_deltas;
  if (deltas.empty())
    deltas = {0.01, 0.05, 0.1, 0.2, 0.3, 0.4, 0.5};

  for (std::size_t g = 0; g < groups.size(); ++g) {
    const auto& members = groups[g];
    const Key& key = keys[g];
    const auto base_cells = [&](auto getter) {
      std::vector<double> xs;
      xs.reserve(members.size());
      for (const CellResult* r : members) xs.push_back(getter(*r));
      return xs;
    };

    const GroupStats gap = stats_of(
        base_cells([](const CellResult& r) { return r.final_gap; }));
    tightness.add_row({key.family, CsvWriter::format(key.intensity),
                       key.predictor, CsvWriter::format(gap.mean),
                       CsvWriter::format(gap.sem), std::to_string(gap.n)});

    std::vector<bool> cross;
    for (const CellResult* r : members) cross.push_back(r->crossover);
    const RateWithSe cr = binomial_rate(cross);
    rates.add_row({key.family, CsvWriter::format(key.intensity), key.predictor,
                   CsvWriter::format(cr.rate), CsvWriter::format(cr.sem),
                   std::to_string(static_cast<int>(cross.size()))});

    std::vector<StoredTrajectory> trajs;
    for (const CellResult* r : members) trajs.push_back(r->gt);
    const auto curve = calibration_curve(trajs, deltas);
    for (std::size_t d = 0; d < deltas.size(); ++d)
      calibration.add_row({key.family, CsvWriter::format(key.intensity),
                           key.predictor, CsvWriter::format(deltas[d]),
                           CsvWriter::format(curve[d].rate),
                           CsvWriter::format(curve[d].sem)});

    // exclusion per rotation angle
    std::vector<double> angles;
    for (const CellResult* r : members)
      for (const auto& [angle, excluded] : r->exclusion) {
        bool seen = false;
        for (double a : angles) seen = seen || a == angle;
        if (!seen) angles.push_back(angle);
      }
    for (double angle : angles) {
      std::vector<bool> flags;
      for (const CellResult* r : members)
        for (const auto& [a, excluded] : r->exclusion)
          if (a == angle) flags.push_back(excluded);
      if (flags.empty()) continue;
      any_exclusion = true;
      const RateWithSe er = binomial_rate(flags);
      exclusion.add_row({key.family, CsvWriter::format(key.intensity),
                         key.predictor, CsvWriter::format(angle),
                         CsvWriter::format(er.rate), CsvWriter::format(er.sem),
                         std::to_string(static_cast<int>(flags.size()))});
    }

    std::vector<double> mm;
    for (const CellResult* r : members)
      if (r->has_mean_mix) mm.push_back(r->mean_minus_mix_beta);
    if (!mm.empty()) {
      any_mean_mix = true;
      const GroupStats s = stats_of(mm);
      mean_mix.add_row({key.family, CsvWriter::format(key.intensity),
                        key.predictor, CsvWriter::format(s.mean),
                        CsvWriter::format(s.sem), std::to_string(s.n)});
    }

    std::vector<bool> out_flags;
    std::vector<double> psnrs;
    for (const CellResult* r : members)
      for (const SampleAudit& a : r->audit) {
        out_flags.push_back(a.out_of_set);
        psnrs.push_back(a.psnr_vs_truth);
      }
    if (!out_flags.empty()) {
      any_audit = true;
      const auto report = hallucination_report(out_flags, psnrs);
      hallucination.add_row(
          {key.family, CsvWriter::format(key.intensity), key.predictor,
           CsvWriter::format(report.flag_rate),
           report.psnr_in_set ? CsvWriter::format(*report.psnr_in_set) : "",
           report.psnr_out_of_set
               ? CsvWriter::format(*report.psnr_out_of_set)
               : "",
           std::to_string(static_cast<int>(out_flags.size()))});
    }
  }

  tightness.write(outdir / "tightness.csv");
  rates.write(outdir / "rates.csv");
  calibration.write(outdir / "calibration.csv");
  if (any_exclusion) exclusion.write(outdir / "exclusion.csv");
  if (any_mean_mix) mean_mix.write(outdir / "mean_vs_mix.csv");
  if (any_audit) hallucination.write(outdir / "hallucination.csv");

  return SweepResult{static_cast<int>(cells.size()), failed};
}

std::vector<std::string> export_run(const std::filesystem::path& run_dir,
                                    const std::filesystem::path& outdir,
                                    double white_point) {
  std::filesystem::create_directories(outdir);
  std::vector<std::string> missing;

  Trajectory traj;
  bool have_traj = false;
  if (std::filesystem::exists(run_dir / "trajectory.csv")) {
    traj = read_trajectory_csv(run_dir / "trajectory.csv");
    have_traj = true;
  } else {
    missing.push_back("trajectory.csv");
  }

  if (have_traj) {
    // fig3-style: per-step gap between the confidence coefficient and the
    // ground-truth NLL
    std::size_t truth_idx = traj.candidate_ids.size();
    for (std::size_t c = 0; c < traj.candidate_ids.size(); ++c)
      if (traj.candidate_ids[c] == "truth") truth_idx = c;
    if (truth_idx < traj.candidate_ids.size()) {
      CsvWriter gap({"t", "beta", "nll_truth", "gap"});
      for (std::size_t t = 0; t < traj.step.size(); ++t)
        gap.add_row({CsvWriter::format(traj.step[t]),
                     CsvWriter::format(traj.beta[t]),
                     CsvWriter::format(traj.candidate_nll[truth_idx][t]),
                     CsvWriter::format(traj.beta[t] -
                                       traj.candidate_nll[truth_idx][t])});
      gap.write(outdir / "fig_tightness_trace.csv");

      // calibration over a dense post-hoc delta grid
      StoredTrajectory gt;
      gt.beta = traj.beta;
      gt.truth_nll = traj.candidate_nll[truth_idx];
      CsvWriter calib({"delta", "crossover"});
      for (double d = 0.01; d < 1.0; d += 0.02)
        calib.add_row({CsvWriter::format(d),
                       crossover_flag(gt.beta, gt.truth_nll, d) ? "1" : "0"});
      calib.write(outdir / "fig_calibration_trace.csv");
    }

    CsvWriter excl({"rotation_angle", "excluded_final"});
    bool any = false;
    for (std::size_t c = 0; c < traj.candidate_ids.size(); ++c) {
      if (traj.candidate_ids[c].rfind("rot_", 0) == 0) {
        any = true;
        excl.add_row({traj.candidate_ids[c].substr(4),
                      traj.member[c].back() ? "0" : "1"});
      }
    }
    if (any) excl.write(outdir / "fig_exclusion.csv");
  }

  if (std::filesystem::exists(run_dir / "mean_vs_mix.csv"))
    std::filesystem::copy_file(run_dir / "mean_vs_mix.csv",
                               outdir / "fig_mean_vs_mix.csv",
                               std::filesystem::copy_options::overwrite_existing);

  if (std::filesystem::exists(run_dir / "sample_audit.csv"))
    std::filesystem::copy_file(run_dir / "sample_audit.csv",
                               outdir / "fig_hallucination.csv",
                               std::filesystem::copy_options::overwrite_existing);

  if (std::filesystem::exists(run_dir / "intervals_summary.csv"))
    std::filesystem::copy_file(run_dir / "intervals_summary.csv",
                               outdir / "fig_interval_quality.csv",
                               std::filesystem::copy_options::overwrite_existing);

  Image truth, recon;
  bool have_images = false;
  if (std::filesystem::exists(run_dir / "truth.img") &&
      std::filesystem::exists(run_dir / "recon.img")) {
    truth = read_image_file(run_dir / "truth");
    recon = read_image_file(run_dir / "recon");
    have_images = true;
  } else {
    missing.push_back("truth.img/recon.img");
  }

  if (have_images) {
    write_pgm(outdir / "truth.pgm", truth);
    write_pgm(outdir / "recon.pgm", recon);
    Image err(truth.side());
    double max_err = 0.0;
    for (int i = 0; i < truth.side(); ++i)
      for (int j = 0; j < truth.side(); ++j) {
        err(i, j) = std::fabs(truth(i, j) - recon(i, j));
        max_err = std::max(max_err, err(i, j));
      }
    const double wp = white_point > 0.0 ? white_point
                                        : (max_err > 0.0 ? max_err : 1.0);
    write_pgm(outdir / "abs_error.pgm", err, wp);
  }

  // interval maps written by the intervals command, if present
  for (const char* method : {"worst_case", "boundary"}) {
    const auto lower = run_dir / (std::string(method) + "_lower");
    if (std::filesystem::exists(lower.string() + ".img")) {
      const Image lo = read_image_file(lower);
      const Image hi =
          read_image_file(run_dir / (std::string(method) + "_upper"));
      Image half(lo.side());
      double max_half = 0.0;
      for (int i = 0; i < lo.side(); ++i)
        for (int j = 0; j < lo.side(); ++j) {
          half(i, j) = 0.5 * (hi(i, j) - lo(i, j));
          max_half = std::max(max_half, half(i, j));
        }
      const double wp = white_point > 0.0 ? white_point
                                          : (max_half > 0.0 ? max_half : 1.0);
      write_pgm(outdir / (std::string(method) + "_halfwidth.pgm"), half, wp);
    } else {
      missing.push_back(std::string(method) + " interval maps");
    }
  }

  return missing;
}

}  // namespace ctseq
