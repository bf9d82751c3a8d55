#pragma once
// Internal: Gaussian noise with a prescribed spectral amplitude shape,
// generated by inverse real FFT of Hermitian coefficients.  Not installed.

#include <cstddef>
#include <mutex>
#include <vector>

#include "qtwtt/rng.hpp"

namespace qtwtt::detail {

// Single process-wide mutex guarding the FFTW planner (plan creation and
// destruction; executing a made plan needs no lock).
std::mutex& fftw_planner_mutex();

// Real series of length n whose expected amplitude spectrum at rfft bin k
// (k = 1..n/2) is proportional to amp[k-1].  The DC bin is zero, so the
// sample mean is exactly zero.  Output is scaled to unit sample variance
// when normalize is true.  Consumes 2 normal draws per bin.
std::vector<double> shaped_gaussian(std::size_t n,
                                    const std::vector<double>& amp, Rng& rng,
                                    bool normalize = true);

}  // namespace qtwtt::detail
