#include "ctseq/recon.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "ctseq/fft.hpp"
#include "ctseq/likelihood.hpp"

namespace ctseq {

void OptimizerConfig::validate() const {
  if (steps < 1) throw std::invalid_argument("OptimizerConfig: steps < 1");
  if (!(learning_rate > 0.0))
    throw std::invalid_argument("OptimizerConfig: learning_rate <= 0");
  if (!(beta1 > 0.0 && beta1 < 1.0) || !(beta2 > 0.0 && beta2 < 1.0))
    throw std::invalid_argument("OptimizerConfig: moment decay outside (0,1)");
  if (!(epsilon > 0.0))
    throw std::invalid_argument("OptimizerConfig: epsilon <= 0");
}

void adam_step(std::span<double> iterate, std::span<const double> gradient,
               AdamState& state, const OptimizerConfig& config) {
  if (iterate.size() != gradient.size() || state.m.size() != iterate.size())
    throw std::invalid_argument("adam_step: size mismatch");
  ++state.t;
  const double bc1 = 1.0 - std::pow(config.beta1, state.t);
  const double bc2 = 1.0 - std::pow(config.beta2, state.t);
  for (std::size_t i = 0; i < iterate.size(); ++i) {
    const double g = gradient[i];
    state.m[i] = config.beta1 * state.m[i] + (1.0 - config.beta1) * g;
    state.v[i] = config.beta2 * state.v[i] + (1.0 - config.beta2) * g * g;
    const double mhat = state.m[i] / bc1;
    const double vhat = state.v[i] / bc2;
    iterate[i] -= config.learning_rate * mhat / (std::sqrt(vhat) + config.epsilon);
  }
}

std::vector<double> ramp_filter(std::span<const double> projection) {
  const std::size_t n = projection.size();
  const std::size_t len = next_pow2(2 * n);

  // Band-limited Ram-Lak kernel in real space (unit detector spacing):
  // h(0) = 1/4, h(k) = -1/(pi k)^2 for odd k, 0 for even k. Using the DFT of
  // this kernel instead of |w| directly avoids the DC-offset artifact.
  std::vector<std::complex<double>> kernel(len, 0.0);
  kernel[0] = 0.25;
  for (std::size_t k = 1; k <= len / 2; ++k) {
    if (k % 2 == 1) {
      const double v = -1.0 / (kPi * kPi * static_cast<double>(k * k));
      kernel[k] = v;
      kernel[len - k] = v;
    }
  }
  fft(kernel, false);
  // the truncated kernel window leaves a small positive DC response; the
  // ideal ramp is exactly zero there
  kernel[0] = 0.0;

  std::vector<std::complex<double>> spec(len, 0.0);
  for (std::size_t i = 0; i < n; ++i) spec[i] = projection[i];
  fft(spec, false);
  for (std::size_t i = 0; i < len; ++i) spec[i] *= kernel[i].real();
  fft(spec, true);

  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = spec[i].real();
  return out;
}

namespace {

std::vector<double> counts_to_integrals(const Measurement& m, int side) {
  std::vector<double> g(side);
  for (int i = 0; i < side; ++i) {
    const double y = std::max<double>(static_cast<double>(m.counts[i]), 1.0);
    g[i] = std::max(0.0, -std::log(y / m.intensity));
  }
  return g;
}

}  // namespace

FbpAccumulator::FbpAccumulator(const Projector& proj)
    : proj_(&proj),
      sum_(static_cast<std::size_t>(proj.geometry().side) *
               proj.geometry().side,
           0.0) {}

void FbpAccumulator::add(const Measurement& m) {
  const Geometry& geom = proj_->geometry();
  m.validate(geom.side);
  auto g = counts_to_integrals(m, geom.side);
  // counts_to_integrals estimates (l/r) R x; divide the path factor out so
  // the filtered values are in plain line-integral units.
  const double inv_path = 1.0 / geom.pixel_length();
  for (double& v : g) v *= inv_path;
  const auto filtered = ramp_filter(g);
  // backproject_add multiplies by (l/r); cancel it with another inv_path.
  proj_->backproject_add(filtered, m.angle, inv_path, sum_);
  ++count_;
}

Image FbpAccumulator::reconstruct() const {
  if (count_ == 0)
    throw std::invalid_argument("FbpAccumulator: no measurements");
  const int side = proj_->geometry().side;
  Image out(side);
  auto& vals = out.mutable_values();
  const double scale = kPi / static_cast<double>(count_);
  for (std::size_t p = 0; p < vals.size(); ++p)
    vals[p] = clamp01(scale * sum_[p]);
  return out;
}

Image fbp(std::span<const Measurement> ms, const Projector& proj) {
  if (ms.empty()) throw std::invalid_argument("fbp: no measurements");
  FbpAccumulator acc(proj);
  for (const Measurement& m : ms) acc.add(m);
  return acc.reconstruct();
}

Image fbp(std::span<const Measurement> ms, const Geometry& geom) {
  Projector proj(geom);
  return fbp(ms, proj);
}

Image mle(std::span<const Measurement> ms, const Image& init,
          const OptimizerConfig& config, const Projector& proj) {
  config.validate();
  if (ms.empty()) throw std::invalid_argument("mle: no measurements");
  if (init.side() != proj.geometry().side)
    throw std::invalid_argument("mle: init side mismatch");

  Image iterate = init;
  AdamState state(iterate.pixel_count());
  std::vector<double> grad(iterate.pixel_count());
  for (int s = 0; s < config.steps; ++s) {
    std::fill(grad.begin(), grad.end(), 0.0);
    for (const Measurement& m : ms) nll_gradient_add(iterate, m, proj, grad);
    adam_step(iterate.mutable_values(), grad, state, config);
    iterate.clamp01();
  }
  if (cumulative_nll(iterate, ms, proj) > cumulative_nll(init, ms, proj))
    return init;
  return iterate;
}

Image mle(std::span<const Measurement> ms, const Image& init,
          const OptimizerConfig& config, const Geometry& geom) {
  Projector proj(geom);
  return mle(ms, init, config, proj);
}

Image gaussian_smooth(const Image& image, double sigma) {
  if (!(sigma >= 0.0))
    throw std::invalid_argument("gaussian_smooth: sigma must be >= 0");
  if (sigma == 0.0) return image;

  const int radius = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> kernel(2 * radius + 1);
  for (int k = -radius; k <= radius; ++k)
    kernel[k + radius] = std::exp(-0.5 * (k * k) / (sigma * sigma));

  const int side = image.side();
  std::vector<double> tmp(image.pixel_count());
  // horizontal pass, kernel renormalized over the in-bounds support
  for (int i = 0; i < side; ++i) {
    for (int j = 0; j < side; ++j) {
      double acc = 0.0, wsum = 0.0;
      for (int k = -radius; k <= radius; ++k) {
        const int jj = j + k;
        if (jj < 0 || jj >= side) continue;
        const double w = kernel[k + radius];
        acc += w * image(i, jj);
        wsum += w;
      }
      tmp[static_cast<std::size_t>(i) * side + j] = acc / wsum;
    }
  }
  Image out(side);
  for (int i = 0; i < side; ++i) {
    for (int j = 0; j < side; ++j) {
      double acc = 0.0, wsum = 0.0;
      for (int k = -radius; k <= radius; ++k) {
        const int ii = i + k;
        if (ii < 0 || ii >= side) continue;
        const double w = kernel[k + radius];
        acc += w * tmp[static_cast<std::size_t>(ii) * side + j];
        wsum += w;
      }
      out(i, j) = clamp01(acc / wsum);
    }
  }
  return out;
}

}  // namespace ctseq
