#pragma once

#include <span>
#include <stdexcept>
#include <vector>

namespace ctseq {

inline constexpr double kPi = 3.14159265358979323846;

/// Square attenuation image with values in [0, 1], row-major storage.
class Image {
 public:
  Image() = default;

  explicit Image(int side, double fill = 0.0) : side_(side) {
    if (side < 1) throw std::invalid_argument("Image: side must be >= 1");
    if (fill < 0.0 || fill > 1.0)
      throw std::invalid_argument("Image: fill outside [0, 1]");
    values_.assign(static_cast<std::size_t>(side) * side, fill);
  }

  /// Takes ownership of `values` (row-major, side*side); rejects values
  /// outside [0, 1].
  static Image from_values(int side, std::vector<double> values);

  int side() const { return side_; }
  std::size_t pixel_count() const { return values_.size(); }

  double operator()(int row, int col) const {
    return values_[static_cast<std::size_t>(row) * side_ + col];
  }
  double& operator()(int row, int col) {
    return values_[static_cast<std::size_t>(row) * side_ + col];
  }

  std::span<const double> values() const { return values_; }
  std::vector<double>& mutable_values() { return values_; }

  void clamp01() {
    for (double& v : values_) v = v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v);
  }

  bool operator==(const Image&) const = default;

 private:
  int side_ = 0;
  std::vector<double> values_;
};

/// Scanner geometry: one detector bin per image column and the physical
/// length `path_scale` of the image side (converts pixels to path length).
struct Geometry {
  int side = 0;
  double path_scale = 4.0;

  double pixel_length() const { return path_scale / side; }

  void validate() const {
    if (side < 1) throw std::invalid_argument("Geometry: side must be >= 1");
    if (!(path_scale > 0.0))
      throw std::invalid_argument("Geometry: path_scale must be > 0");
  }
};

inline double clamp01(double v) { return v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v); }

}  // namespace ctseq
