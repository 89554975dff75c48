#pragma once

#include <cstdint>
#include <span>
#include <unordered_map>
#include <vector>

#include "ctseq/image.hpp"

namespace ctseq {

// Binary pixel-driven discretization of the parallel-beam transform: each
// pixel centre is rotated by -angle (CCW degrees) about the image centre and
// dropped into the detector bin containing it. The detector spans [0, side)
// centred on the image; pixels landing outside contribute nothing. Angle 0
// integrates along image columns.

/// Per-pixel detector bin index (row-major), -1 where the pixel is dropped.
std::vector<std::int32_t> detector_assignment(int side, double angle_deg);

/// (path_scale/side) * R_angle * image  — line integrals in path-length units.
std::vector<double> radon_project(const Image& image, double angle_deg,
                                  const Geometry& geom);

/// (path_scale/side) * R_angle^T * detector_values; exact adjoint of
/// radon_project under the same assignment.
std::vector<double> radon_backproject(std::span<const double> detector_values,
                                      double angle_deg, const Geometry& geom);

/// Caches per-angle assignments. Not for concurrent use by multiple threads;
/// give each worker its own instance.
class Projector {
 public:
  explicit Projector(Geometry geom) : geom_(geom) { geom_.validate(); }

  const Geometry& geometry() const { return geom_; }

  const std::vector<std::int32_t>& assignment(double angle_deg) const;

  std::vector<double> project(const Image& image, double angle_deg) const;

  /// out += scale * R^T v  (out is a side*side row-major grid).
  void backproject_add(std::span<const double> detector_values,
                       double angle_deg, double scale,
                       std::span<double> out) const;

  std::vector<double> backproject(std::span<const double> detector_values,
                                  double angle_deg) const;

 private:
  Geometry geom_;
  mutable std::unordered_map<std::uint64_t, std::vector<std::int32_t>> cache_;
};

}  // namespace ctseq
