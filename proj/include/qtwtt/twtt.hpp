#pragma once
// Two-way clock offset recovery from four tag streams.
//
// Convention: the "up" comparison correlates D3 against D1 (delay t1 - t3,
// route A), the "down" comparison D4 against D2 (delay t2 - t4, route B).
// For a clock offset theta of the local timescale against the remote one,
// the up delay carries -theta and the down delay +theta, so
//   t0 = (down - up) / 2
// cancels the reciprocal path delay and returns theta plus half the route
// asymmetry.

#include <array>
#include <cstdint>
#include <optional>
#include <vector>

#include "qtwtt/coincidence.hpp"
#include "qtwtt/stability.hpp"
#include "qtwtt/tagstream.hpp"

namespace qtwtt {

// Clock offset from the two one-way correlation peak centers.
double recover_offset(double up_center_ps, double down_center_ps);

// Offset uncertainty from the one-way delay uncertainties.
double combine_sd(double sd_up_ps, double sd_down_ps);

// Predicted offset SD from peak widths (1/e half-widths, ps) and detected
// pair counts per window.
double predict_sd(double width_up_ps, double n_up, double width_down_ps,
                  double n_down);

// Same, with each pair count derated by the accidental fraction through
// its coincidence-to-accidental ratio (+inf means no accidentals).
double predict_sd_car(double width_up_ps, double n_up, double car_up,
                      double width_down_ps, double n_down, double car_down);

struct CoincidenceParams {
    std::int64_t window_ps = 2000;
    std::int64_t bin_width_ps = 10;
    // Offset guesses; when absent they are located by a coarse search.
    std::optional<std::int64_t> guess_up_ps;
    std::optional<std::int64_t> guess_down_ps;
    std::int64_t search_halfwidth_ps = 200'000'000;
    std::int64_t coarse_bin_ps = 1000;
};

// Coarse correlation search: delay of b against a maximizing the histogram
// at coarse_bin_ps resolution over +-search_halfwidth_ps.
std::int64_t find_delay_ps(const TimeTagStream& a, const TimeTagStream& b,
                           std::int64_t search_halfwidth_ps,
                           std::int64_t coarse_bin_ps);

struct TwttWindowResult {
    int index = 0;
    std::int64_t window_start_ps = 0;
    PeakFit up_fit;    // route A, D1 against D3
    PeakFit down_fit;  // route B, D2 against D4
    double t0_ps = 0.0;
    double predicted_sd_eq2_ps = 0.0;  // width/count prediction
    double predicted_sd_eq3_ps = 0.0;  // accidental-corrected prediction
};

struct TwttSeries {
    double window_s = 0.0;
    std::int64_t start_ps = 0;
    int total_windows = 0;
    std::vector<TwttWindowResult> results;  // successfully analyzed windows
    std::vector<int> gap_indices;           // windows without a usable peak
    // Ground-truth offset at each window midpoint (all indices), when the
    // series came from a simulation.
    std::optional<std::vector<double>> truth_t0_ps;
};

// Windowed analysis of a D1..D4 stream quadruple.  The common span is cut
// into floor(span / window_s) windows; each yields one recovered offset or
// a gap.  Peak-search guesses are located once on the first resolvable
// window and reused, so results do not depend on thread count.
TwttSeries analyze_series(const std::array<TimeTagStream, 4>& streams,
                          double window_s, const CoincidenceParams& params);

// Phase series (seconds) for the stability module: one sample per window,
// gaps masked, spacing window_s.
PhaseSeries to_phase_series(const TwttSeries& s);

}  // namespace qtwtt
