#pragma once

#include <span>
#include <vector>

#include "ctseq/forward.hpp"
#include "ctseq/image.hpp"
#include "ctseq/radon.hpp"

namespace ctseq {

// Poisson negative log-likelihood of a measurement under a candidate image:
//   sum_i [ lambda_i - y_i log lambda_i + log(y_i!) ]
// The log-factorial is kept (via lgamma) so values are absolutely meaningful
// and comparable across candidates and against the confidence coefficient.

double nll_increment(const Image& image, const Measurement& m,
                     const Geometry& geom);
double nll_increment(const Image& image, const Measurement& m,
                     const Projector& proj);

/// Exact gradient of nll_increment: (l/r) R_angle^T (y - lambda(x)).
std::vector<double> nll_gradient(const Image& image, const Measurement& m,
                                 const Geometry& geom);

/// grad += gradient of nll_increment; shared-assignment fast path.
void nll_gradient_add(const Image& image, const Measurement& m,
                      const Projector& proj, std::span<double> grad);

double cumulative_nll(const Image& image, std::span<const Measurement> ms,
                      const Geometry& geom);
double cumulative_nll(const Image& image, std::span<const Measurement> ms,
                      const Projector& proj);

/// Cumulative NLL gradient over a measurement sequence (sum of increments).
std::vector<double> cumulative_nll_gradient(const Image& image,
                                            std::span<const Measurement> ms,
                                            const Projector& proj);

}  // namespace ctseq
