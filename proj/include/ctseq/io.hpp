#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "ctseq/forward.hpp"
#include "ctseq/image.hpp"

namespace ctseq {

// On-disk formats:
//  - images: raw 32-bit little-endian IEEE-754 grids, row-major, in
//    <base>.img, with a JSON sidecar <base>.json carrying side length, value
//    range and provenance
//  - measurement logs: one JSON object per line (step, angle, intensity,
//    counts)
//  - trajectories and metric tables: comma-separated text with a header row
//  - quick-view maps: 8-bit binary PGM

void write_image_file(const std::filesystem::path& base, const Image& image,
                      nlohmann::json provenance = {});
Image read_image_file(const std::filesystem::path& base,
                      nlohmann::json* metadata = nullptr);

void write_measurement_log(const std::filesystem::path& path,
                           std::span<const Measurement> ms);
std::vector<Measurement> read_measurement_log(
    const std::filesystem::path& path);

/// Per-step confidence records for every tracked candidate, in registration
/// order. Columns: t, beta, threshold, then nll_<id>, member_<id> per id.
struct Trajectory {
  double delta = 0.0;
  std::vector<std::string> candidate_ids;
  std::vector<int> step;
  std::vector<double> beta;
  std::vector<double> threshold;
  std::vector<std::vector<double>> candidate_nll;  // [candidate][step]
  std::vector<std::vector<bool>> member;           // [candidate][step]
};

void write_trajectory_csv(const std::filesystem::path& path,
                          const Trajectory& traj);
Trajectory read_trajectory_csv(const std::filesystem::path& path);

/// Greyscale render: 0 maps to black, `white_point` (and above) to white.
void write_pgm(const std::filesystem::path& path, const Image& image,
               double white_point = 1.0);

/// Minimal CSV table writer; all numeric cells are printed with %.17g so
/// re-reading reproduces the doubles exactly.
class CsvWriter {
 public:
  explicit CsvWriter(std::vector<std::string> header);

  void add_row(const std::vector<std::string>& cells);
  void write(const std::filesystem::path& path) const;

  static std::string format(double v);
  static std::string format(int v);

 private:
  std::vector<std::string> header_;
  std::vector<std::vector<std::string>> rows_;
};

std::vector<std::vector<std::string>> read_csv(
    const std::filesystem::path& path, std::vector<std::string>* header);

}  // namespace ctseq
