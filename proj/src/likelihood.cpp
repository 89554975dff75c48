#include "ctseq/likelihood.hpp"

#include <cmath>
#include <stdexcept>

namespace ctseq {

namespace {

double nll_from_integrals(std::span<const double> integrals,
                          const Measurement& m) {
  double nll = 0.0;
  for (std::size_t i = 0; i < integrals.size(); ++i) {
    const double lambda = m.intensity * std::exp(-integrals[i]);
    const double y = static_cast<double>(m.counts[i]);
    nll += lambda - y * std::log(lambda) + std::lgamma(y + 1.0);
  }
  return nll;
}

}  // namespace

double nll_increment(const Image& image, const Measurement& m,
                     const Geometry& geom) {
  m.validate(geom.side);
  return nll_from_integrals(radon_project(image, m.angle, geom), m);
}

double nll_increment(const Image& image, const Measurement& m,
                     const Projector& proj) {
  m.validate(proj.geometry().side);
  return nll_from_integrals(proj.project(image, m.angle), m);
}

std::vector<double> nll_gradient(const Image& image, const Measurement& m,
                                 const Geometry& geom) {
  Projector proj(geom);
  std::vector<double> grad(image.pixel_count(), 0.0);
  nll_gradient_add(image, m, proj, grad);
  return grad;
}

void nll_gradient_add(const Image& image, const Measurement& m,
                      const Projector& proj, std::span<double> grad) {
  const Geometry& geom = proj.geometry();
  m.validate(geom.side);
  if (image.side() != geom.side || grad.size() != image.pixel_count())
    throw std::invalid_argument("nll_gradient_add: size mismatch");
  auto residual = proj.project(image, m.angle);
  for (int i = 0; i < geom.side; ++i) {
    const double lambda = m.intensity * std::exp(-residual[i]);
    residual[i] = static_cast<double>(m.counts[i]) - lambda;
  }
  proj.backproject_add(residual, m.angle, 1.0, grad);
}

double cumulative_nll(const Image& image, std::span<const Measurement> ms,
                      const Geometry& geom) {
  Projector proj(geom);
  return cumulative_nll(image, ms, proj);
}

double cumulative_nll(const Image& image, std::span<const Measurement> ms,
                      const Projector& proj) {
  if (ms.empty())
    throw std::invalid_argument("cumulative_nll: empty measurement sequence");
  double total = 0.0;
  for (const Measurement& m : ms) total += nll_increment(image, m, proj);
  return total;
}

std::vector<double> cumulative_nll_gradient(const Image& image,
                                            std::span<const Measurement> ms,
                                            const Projector& proj) {
  std::vector<double> grad(image.pixel_count(), 0.0);
  for (const Measurement& m : ms) nll_gradient_add(image, m, proj, grad);
  return grad;
}

}  // namespace ctseq
