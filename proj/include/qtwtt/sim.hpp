#pragma once
// Photon-pair link simulation.
//
// The simulated instrument is a two-way optical time transfer link built
// from one correlated pair source and four single-photon detectors.
// Signal photons are split between two opposite transmission routes
// (route A: free-space uplink then fiber return, detected on D1; route B:
// fiber out then free-space downlink, detected on D2); heralding idlers
// are split locally onto D3 and D4.  All continuous quantities stay real
// until detector timestamping rounds them to integer picoseconds.

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "qtwtt/tagstream.hpp"

namespace qtwtt {

// ---- model descriptions -------------------------------------------------

struct PairSourceModel {
    double pair_rate_hz = 0.0;        // generated pairs per second
    double correlation_sigma_ps = 0;  // RMS signal-idler delay spread
};

// Multiplicative transmittance fluctuation of a turbulent path, sampled
// on a uniform grid.  The underlying shaped Gaussian is exponentiated to
// a unit-mean lognormal whose relative variance equals the scintillation
// index; the deepest zero_fade_fraction of samples are forced to zero
// (complete dropouts).  The shaping loop adjusts itself so the realized
// PSD of the final trace follows f^exponent up to knee_hz.
struct FadingModel {
    double exponent = -2.0 / 3.0;
    double knee_hz = 20.0;
    double scintillation_index = 0.0;  // relative variance of transmittance
    double zero_fade_fraction = 0.0;
    double dt_s = 1e-3;
};

enum class DriftShape { sinusoid, linear_ramp, piecewise_table };

// Deterministic slow variation of a path delay.
struct DriftSpec {
    DriftShape shape = DriftShape::sinusoid;
    double amplitude_ps = 0.0;  // peak (sinusoid) or total change (ramp)
    double period_s = 1.0;      // sinusoid period or ramp duration
    std::vector<std::pair<double, double>> table_s_ps;  // (t_s, delay_ps)

    double eval_ps(double t_s) const;
};

struct ChannelModel {
    double mean_loss_db = 0.0;
    double base_delay_ps = 0.0;
    std::optional<DriftSpec> drift;
    double jitter_sigma_ps = 0.0;
    std::optional<FadingModel> fading;
};

struct DetectorModel {
    double efficiency = 1.0;
    double jitter_sigma_ps = 0.0;
    double dark_rate_hz = 0.0;
    std::int64_t dead_time_ps = 0;
};

enum class ClockNoiseKind { white_pm, flicker_pm, white_fm };

// Noise levels: white_pm is the RMS phase deviation per sample in
// picoseconds; flicker_pm is the one-sided phase PSD at 1 Hz in s^2/Hz;
// white_fm is the Allan deviation at tau = 1 s of the resulting random
// walk of phase.
struct ClockNoiseTerm {
    ClockNoiseKind kind = ClockNoiseKind::white_pm;
    double level = 0.0;
};

struct ClockModel {
    double offset_ps = 0.0;
    double fractional_frequency_offset = 0.0;
    std::vector<ClockNoiseTerm> noise;
};

// loopback: one clock timestamps all four detectors (field-test layout).
// two_clock: D2/D3 follow the local clock, D1/D4 the remote one.
enum class ClockTopology { loopback, two_clock };

struct ClockSetup {
    ClockTopology mode = ClockTopology::loopback;
    ClockModel local;
    std::optional<ClockModel> remote;
};

struct RunSpec {
    double duration_s = 0.0;
    double window_s = 50.0;
    std::uint64_t seed = 1;
};

struct CoincidenceSpec {
    std::int64_t window_ps = 2000;
    std::int64_t bin_width_ps = 10;
};

struct ScenarioConfig {
    PairSourceModel source;
    double idler_attenuation_db = 0.0;
    ChannelModel fs_uplink;      // route A, turbulent leg
    ChannelModel fiber_return;   // route A, return leg
    ChannelModel fiber_out;      // route B, outbound leg
    ChannelModel fs_downlink;    // route B, turbulent leg
    std::array<DetectorModel, 4> detectors;  // D1..D4
    ClockSetup clocks;
    RunSpec run;
    CoincidenceSpec coincidence;
};

// ---- sampled traces ------------------------------------------------------

struct FadingTrace {
    std::int64_t start_ps = 0;
    double dt_s = 1e-3;
    std::vector<double> values;

    double at(std::int64_t t_ps) const;
    bool covers(Span s) const;
};

// Clock phase x(t) in seconds on a uniform grid, linearly interpolated.
struct ClockPhase {
    std::int64_t start_ps = 0;
    double dt_s = 1e-3;
    std::vector<double> x_s;

    double at(std::int64_t t_ps) const;
    bool covers(Span s) const;
};

// ---- synthesis ops -------------------------------------------------------

// Correlated signal/idler pair streams over [0, duration_s).  Pair
// emission is Poisson; the signal-idler delay of each pair is Gaussian
// with RMS correlation_sigma_ps, split symmetrically between the two.
std::pair<TimeTagStream, TimeTagStream> generate_pairs(
    const PairSourceModel& src, double duration_s, std::uint64_t seed);

// Unit-mean transmittance samples, duration_s / dt_s of them.
std::vector<double> synthesize_fading(const FadingModel& model,
                                      double duration_s, std::uint64_t seed);

FadingTrace make_fading_trace(const FadingModel& model, Span span,
                              std::uint64_t seed);

// Clock phase samples x_i (seconds) at spacing dt_s.
std::vector<double> synthesize_clock_phase(const ClockModel& clk,
                                           std::size_t n, double dt_s,
                                           std::uint64_t seed);

ClockPhase make_clock_phase(const ClockModel& clk, Span span, double dt_s,
                            std::uint64_t seed);

// One lossy, jittering, possibly drifting and fading path.  fading may be
// null; when given it must cover the input span.
TimeTagStream propagate(const TimeTagStream& in, const ChannelModel& ch,
                        const FadingTrace* fading, std::uint64_t seed);

// Detection: efficiency thinning, detector jitter, dark counts, clock
// transform to the local timescale, rounding to integer picoseconds, and
// non-paralyzable dead time.  phase must cover the input span.
TimeTagStream timestamp(const TimeTagStream& in, const DetectorModel& det,
                        const ClockPhase& phase, std::uint64_t seed);

// ---- full scenario -------------------------------------------------------

// Ground truth retained by the simulator, sampled at dt_s.
struct SimTruth {
    double dt_s = 1.0;
    std::vector<double> t_s;            // sample times
    std::vector<double> true_t0_ps;     // what recovery should report
    std::vector<double> delay_a_ps;     // route A one-way delay
    std::vector<double> delay_b_ps;     // route B one-way delay
    double route_asymmetry_ps = 0.0;    // (delay_b - delay_a) / 2 at t = 0
};

struct SimResult {
    std::array<TimeTagStream, 4> streams;  // D1..D4
    SimTruth truth;
};

SimResult simulate_scenario(const ScenarioConfig& cfg);

// Sub-seed roles used by simulate_scenario; exposed so tests can reproduce
// individual stages.
enum class SimRole : std::uint64_t {
    pair_generation = 1,
    route_split = 2,
    idler_split = 3,
    seg_fs_uplink = 4,
    seg_fiber_return = 5,
    seg_fiber_out = 6,
    seg_fs_downlink = 7,
    fade_fs_uplink = 8,
    fade_fs_downlink = 9,
    fade_fiber_out = 10,
    fade_fiber_return = 11,
    idler_attenuation = 12,
    det_d1 = 20,
    det_d2 = 21,
    det_d3 = 22,
    det_d4 = 23,
    clock_local = 30,
    clock_remote = 31,
};

std::uint64_t role_seed(std::uint64_t master, SimRole role);

}  // namespace qtwtt
