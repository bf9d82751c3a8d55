#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "qtwtt/rng.hpp"
#include "qtwtt/sim.hpp"
#include "shaped_noise.hpp"

namespace qtwtt {

namespace {

void add_white_pm(std::vector<double>& x, double level_s, Rng& rng) {
    for (double& v : x) v += level_s * rng.normal();
}

// Random walk of phase; step sigma = adev1 * sqrt(dt) reproduces an Allan
// deviation of adev1 at tau = 1 s.
void add_white_fm(std::vector<double>& x, double adev1, double dt_s, Rng& rng) {
    const double step = adev1 * std::sqrt(dt_s);
    double w = 0.0;
    for (double& v : x) {
        w += step * rng.normal();
        v += w;
    }
}

// Phase with one-sided PSD level_1hz / f, realized by f^(-1/2) amplitude
// shaping and scaled so the sample variance matches the band integral.
void add_flicker_pm(std::vector<double>& x, double level_1hz, double dt_s,
                    Rng& rng) {
    const std::size_t n = x.size();
    if (n < 4) return;
    const std::size_t nf = n / 2 + 1;
    const double df = 1.0 / (static_cast<double>(n) * dt_s);
    std::vector<double> amp(nf - 1);
    for (std::size_t k = 1; k < nf; ++k)
        amp[k - 1] = 1.0 / std::sqrt(static_cast<double>(k) * df);
    std::vector<double> g = detail::shaped_gaussian(n, amp, rng);
    const double f_lo = df;
    const double f_hi = 0.5 / dt_s;
    const double target_var = level_1hz * std::log(f_hi / f_lo);
    const double scale = std::sqrt(std::max(target_var, 0.0));
    for (std::size_t i = 0; i < n; ++i) x[i] += scale * g[i];
}

}  // namespace

std::vector<double> synthesize_clock_phase(const ClockModel& clk,
                                           std::size_t n, double dt_s,
                                           std::uint64_t seed) {
    if (n < 1) throw std::invalid_argument("clock phase: need n >= 1");
    if (!(dt_s > 0.0))
        throw std::invalid_argument("clock phase: dt must be positive");
    std::vector<double> x(n, clk.offset_ps / kPsPerS);
    for (std::size_t i = 0; i < n; ++i)
        x[i] += clk.fractional_frequency_offset * static_cast<double>(i) * dt_s;

    std::size_t term_index = 0;
    for (const auto& term : clk.noise) {
        ++term_index;
        if (!(term.level >= 0.0))
            throw std::invalid_argument("clock phase: noise level must be >= 0");
        if (term.level == 0.0) continue;
        Rng rng(derive_seed(seed, term_index));
        switch (term.kind) {
            case ClockNoiseKind::white_pm:
                add_white_pm(x, term.level / kPsPerS, rng);
                break;
            case ClockNoiseKind::white_fm:
                add_white_fm(x, term.level, dt_s, rng);
                break;
            case ClockNoiseKind::flicker_pm:
                add_flicker_pm(x, term.level, dt_s, rng);
                break;
        }
    }
    return x;
}

ClockPhase make_clock_phase(const ClockModel& clk, Span span, double dt_s,
                            std::uint64_t seed) {
    ClockPhase p;
    p.start_ps = span.start_ps;
    p.dt_s = dt_s;
    const double span_s = span.length_s();
    const auto n = static_cast<std::size_t>(std::ceil(span_s / dt_s)) + 2;
    p.x_s = synthesize_clock_phase(clk, n, dt_s, seed);
    return p;
}

double ClockPhase::at(std::int64_t t_ps) const {
    if (x_s.empty()) return 0.0;
    if (x_s.size() == 1) return x_s[0];
    const double dt_ps = dt_s * kPsPerS;
    const double u = static_cast<double>(t_ps - start_ps) / dt_ps;
    if (u <= 0.0) return x_s.front();
    const auto last = static_cast<double>(x_s.size() - 1);
    if (u >= last) return x_s.back();
    const auto i = static_cast<std::size_t>(u);
    const double frac = u - static_cast<double>(i);
    return x_s[i] + frac * (x_s[i + 1] - x_s[i]);
}

bool ClockPhase::covers(Span s) const {
    if (x_s.size() < 2) return false;
    const double dt_ps = dt_s * kPsPerS;
    const double end = static_cast<double>(start_ps) +
                       dt_ps * static_cast<double>(x_s.size() - 1);
    return start_ps <= s.start_ps && static_cast<double>(s.end_ps) <= end;
}

}  // namespace qtwtt
