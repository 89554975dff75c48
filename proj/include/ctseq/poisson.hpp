#pragma once

#include <cstdint>

#include "ctseq/rng.hpp"

namespace ctseq {

/// One Poisson draw. Inversion by sequential search for mean <= 10,
/// transformed rejection (Hormann's PTRD) above; rates across the intensity
/// sweep span ~12 orders of magnitude.
std::int64_t poisson_sample(Rng& rng, double mean);

/// log P[Poisson(mean) = k], evaluated directly.
double poisson_log_pmf(std::int64_t k, double mean);

}  // namespace ctseq
