#pragma once

#include <complex>
#include <vector>

namespace ctseq {

/// In-place radix-2 FFT; size must be a power of two.
void fft(std::vector<std::complex<double>>& a, bool inverse);

/// Smallest power of two >= n.
std::size_t next_pow2(std::size_t n);

}  // namespace ctseq
