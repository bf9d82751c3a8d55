#pragma once
// Coincidence histogramming and correlation-peak fitting.
//
// cross_correlate sweeps two sorted tag streams with a pair of cursors
// (never the full cross product) and histograms the pairwise delays
// t_b - t_a that fall inside a window around an offset guess.  fit_peak
// extracts the Gaussian peak riding on the accidental floor; estimate_car
// turns the fitted peak into a coincidence-to-accidental ratio.

#include <cstdint>
#include <stdexcept>
#include <vector>

#include "qtwtt/tagstream.hpp"

namespace qtwtt {

// Histogram contained no usable peak.
class NoPeakError : public std::runtime_error {
public:
    explicit NoPeakError(const std::string& what) : std::runtime_error(what) {}
};

// The peak fit failed to converge within the iteration cap.
class NonConvergenceError : public std::runtime_error {
public:
    explicit NonConvergenceError(const std::string& what)
        : std::runtime_error(what) {}
};

struct CoincidenceHistogram {
    std::int64_t bin_width_ps = 1;
    std::int64_t origin_ps = 0;  // left edge of bin 0
    std::vector<std::uint64_t> counts;
    std::uint64_t n_left = 0;    // tags in stream a
    std::uint64_t n_right = 0;   // tags in stream b
    double integration_s = 0.0;  // overlap of the two spans

    std::size_t size() const { return counts.size(); }
    double bin_center_ps(std::size_t i) const {
        return static_cast<double>(origin_ps) +
               (static_cast<double>(i) + 0.5) * static_cast<double>(bin_width_ps);
    }
    std::uint64_t total() const;
};

// Delays d = t_b - t_a with |d - offset_guess_ps| <= window_ps, binned at
// bin_width_ps.  The histogram spans [guess - window, guess + window] with
// 2 * window / bin_width + 1 bins.  Requires window_ps >= bin_width_ps >= 1
// and window_ps divisible by bin_width_ps.
CoincidenceHistogram cross_correlate(const TimeTagStream& a,
                                     const TimeTagStream& b,
                                     std::int64_t window_ps,
                                     std::int64_t bin_width_ps,
                                     std::int64_t offset_guess_ps = 0);

struct PeakFit {
    double center_ps = 0.0;
    double sigma_ps = 0.0;
    double fwhm_ps = 0.0;
    double amplitude = 0.0;   // counts per bin at peak
    double baseline = 0.0;    // accidental counts per bin
    double pair_count = 0.0;  // background-subtracted area in pairs
    double car = 0.0;         // coincidence-to-accidental ratio
    double reduced_chi2 = 0.0;
};

// Nonlinear least-squares Gaussian-plus-constant fit.  Throws NoPeakError
// when the histogram has no significant peak and NonConvergenceError when
// the iteration cap is hit.
PeakFit fit_peak(const CoincidenceHistogram& h);

// CAR from a fitted peak: true coincidences inside center +- 3 sigma over
// the accidentals expected there from the fitted baseline.  Returns +inf
// when the accidental estimate is zero.
double estimate_car(const CoincidenceHistogram& h, const PeakFit& fit);

enum class WidthConvention { sigma, fwhm, one_over_e_half, one_over_e_full };

// Convert a Gaussian width between conventions.
double convert_width(double value, WidthConvention from, WidthConvention to);

}  // namespace qtwtt
