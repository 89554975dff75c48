#include "ctseq/radon.hpp"

#include <bit>
#include <cmath>
#include <stdexcept>

namespace ctseq {

namespace {

void check_angle(double angle_deg) {
  if (!(angle_deg >= 0.0 && angle_deg < 180.0))
    throw std::invalid_argument("angle must lie in [0, 180)");
}

}  // namespace

std::vector<std::int32_t> detector_assignment(int side, double angle_deg) {
  check_angle(angle_deg);
  const double a = angle_deg * kPi / 180.0;
  const double c = std::cos(a);
  const double s = std::sin(a);
  const double half = 0.5 * (side - 1);
  const double offset = 0.5 * side;
  std::vector<std::int32_t> bins(static_cast<std::size_t>(side) * side);
  std::size_t p = 0;
  for (int i = 0; i < side; ++i) {
    const double y = half - i;  // row 0 is the top of the image
    for (int j = 0; j < side; ++j, ++p) {
      const double x = j - half;
      const double d = x * c + y * s + offset;
      bins[p] = (d >= 0.0 && d < side) ? static_cast<std::int32_t>(d) : -1;
    }
  }
  return bins;
}

std::vector<double> radon_project(const Image& image, double angle_deg,
                                  const Geometry& geom) {
  geom.validate();
  if (image.side() != geom.side)
    throw std::invalid_argument("radon_project: image/geometry side mismatch");
  const auto bins = detector_assignment(geom.side, angle_deg);
  std::vector<double> out(geom.side, 0.0);
  const auto vals = image.values();
  for (std::size_t p = 0; p < vals.size(); ++p) {
    const std::int32_t b = bins[p];
    if (b >= 0) out[b] += vals[p];
  }
  const double scale = geom.pixel_length();
  for (double& v : out) v *= scale;
  return out;
}

std::vector<double> radon_backproject(std::span<const double> detector_values,
                                      double angle_deg, const Geometry& geom) {
  geom.validate();
  if (detector_values.size() != static_cast<std::size_t>(geom.side))
    throw std::invalid_argument(
        "radon_backproject: detector size does not match geometry");
  const auto bins = detector_assignment(geom.side, angle_deg);
  const double scale = geom.pixel_length();
  std::vector<double> out(bins.size(), 0.0);
  for (std::size_t p = 0; p < bins.size(); ++p) {
    const std::int32_t b = bins[p];
    if (b >= 0) out[p] = scale * detector_values[b];
  }
  return out;
}

const std::vector<std::int32_t>& Projector::assignment(double angle_deg) const {
  const std::uint64_t key = std::bit_cast<std::uint64_t>(angle_deg);
  auto it = cache_.find(key);
  if (it == cache_.end())
    it = cache_.emplace(key, detector_assignment(geom_.side, angle_deg)).first;
  return it->second;
}

std::vector<double> Projector::project(const Image& image,
                                       double angle_deg) const {
  if (image.side() != geom_.side)
    throw std::invalid_argument("Projector: image/geometry side mismatch");
  const auto& bins = assignment(angle_deg);
  std::vector<double> out(geom_.side, 0.0);
  const auto vals = image.values();
  for (std::size_t p = 0; p < vals.size(); ++p) {
    const std::int32_t b = bins[p];
    if (b >= 0) out[b] += vals[p];
  }
  const double scale = geom_.pixel_length();
  for (double& v : out) v *= scale;
  return out;
}

void Projector::backproject_add(std::span<const double> detector_values,
                                double angle_deg, double scale,
                                std::span<double> out) const {
  if (detector_values.size() != static_cast<std::size_t>(geom_.side) ||
      out.size() != static_cast<std::size_t>(geom_.side) * geom_.side)
    throw std::invalid_argument("Projector: size mismatch in backproject_add");
  const auto& bins = assignment(angle_deg);
  const double k = scale * geom_.pixel_length();
  for (std::size_t p = 0; p < bins.size(); ++p) {
    const std::int32_t b = bins[p];
    if (b >= 0) out[p] += k * detector_values[b];
  }
}

std::vector<double> Projector::backproject(
    std::span<const double> detector_values, double angle_deg) const {
  std::vector<double> out(static_cast<std::size_t>(geom_.side) * geom_.side,
                          0.0);
  backproject_add(detector_values, angle_deg, 1.0, out);
  return out;
}

}  // namespace ctseq
