#pragma once
// Count-rate traces and Welch spectral estimation.
//
// countrate_trace bins a tag stream into uniform counting intervals; psd
// estimates the one-sided power spectral density of such a trace (or of
// any evenly sampled series) with Welch averaging of Hann-tapered,
// half-overlapping, mean-removed segments.  Normalization is such that
// the integral of the PSD over frequency approximates the series variance.

#include <cstdint>
#include <utility>
#include <vector>

#include "qtwtt/tagstream.hpp"

namespace qtwtt {

struct RateTrace {
    std::vector<double> counts;  // counts per interval
    double dt_s = 1e-3;          // interval length, seconds
    std::int64_t start_ps = 0;

    std::size_t size() const { return counts.size(); }
    double mean() const;
};

// Counts per dt_s interval across the stream's span.  Requires dt_s > 0
// and a span at least two intervals long.
RateTrace countrate_trace(const TimeTagStream& s, double dt_s);

struct Spectrum {
    std::vector<double> freqs_hz;  // ascending, DC excluded
    std::vector<double> power;     // one-sided PSD, units^2 / Hz

    std::size_t size() const { return freqs_hz.size(); }
};

// Welch PSD of an evenly sampled series (spacing dt_s).  Segment length is
// min(n, max(n / 8, 64)) with 50 % overlap.  Requires n >= 8.
Spectrum psd(const std::vector<double>& x, double dt_s);

inline Spectrum psd(const RateTrace& t) { return psd(t.counts, t.dt_s); }

// Least-squares fit of log10(power) vs log10(freq) over [f_min_hz, f_max_hz].
// Returns {exponent, level}, where power ~= level * f^exponent.  Needs at
// least five positive-power bins in range.
std::pair<double, double> powerlaw_fit(const Spectrum& s, double f_min_hz,
                                       double f_max_hz);

// 10 log10(Pa / Pb) with nearest-bin lookup in each spectrum.  f_hz must
// lie within both frequency axes.  Returns +inf when Pb is zero.
double psd_ratio_db(const Spectrum& a, const Spectrum& b, double f_hz);

}  // namespace qtwtt
