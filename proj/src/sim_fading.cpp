#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "qtwtt/rng.hpp"
#include "qtwtt/sim.hpp"
#include "qtwtt/spectral.hpp"
#include "shaped_noise.hpp"

namespace qtwtt {

namespace detail {

std::vector<double> shaped_gaussian(std::size_t n,
                                    const std::vector<double>& amp, Rng& rng,
                                    bool normalize) {
    const std::size_t nf = n / 2 + 1;
    if (amp.size() != nf - 1)
        throw std::invalid_argument("shaped_gaussian: amp size mismatch");

    std::vector<fftw_complex> spec(nf);
    spec[0][0] = 0.0;
    spec[0][1] = 0.0;
    const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
    for (std::size_t k = 1; k < nf; ++k) {
        const double re = rng.normal();
        const double im = rng.normal();
        const bool nyquist = n % 2 == 0 && k == nf - 1;
        spec[k][0] = amp[k - 1] * (nyquist ? re : re * inv_sqrt2);
        spec[k][1] = nyquist ? 0.0 : amp[k - 1] * im * inv_sqrt2;
    }

    std::vector<double> x(n);
    fftw_plan plan;
    {
        std::lock_guard<std::mutex> lock(fftw_planner_mutex());
        plan = fftw_plan_dft_c2r_1d(static_cast<int>(n), spec.data(), x.data(),
                                    FFTW_ESTIMATE);
    }
    if (!plan) throw std::runtime_error("shaped_gaussian: fftw plan failed");
    fftw_execute(plan);
    {
        std::lock_guard<std::mutex> lock(fftw_planner_mutex());
        fftw_destroy_plan(plan);
    }

    if (normalize) {
        double var = 0.0;
        for (double v : x) var += v * v;  // mean is exactly zero (DC bin is 0)
        var /= static_cast<double>(n);
        if (var > 0.0) {
            const double scale = 1.0 / std::sqrt(var);
            for (double& v : x) v *= scale;
        }
    }
    return x;
}

}  // namespace detail

namespace {

void validate_fading(const FadingModel& m) {
    if (!(m.dt_s > 0.0))
        throw std::invalid_argument("fading: dt must be positive");
    if (!(m.knee_hz > 0.0))
        throw std::invalid_argument("fading: knee frequency must be positive");
    if (!(m.exponent < 0.0))
        throw std::invalid_argument("fading: exponent must be negative");
    if (!(m.scintillation_index >= 0.0))
        throw std::invalid_argument("fading: scintillation index must be >= 0");
    if (!(m.zero_fade_fraction >= 0.0) || !(m.zero_fade_fraction < 1.0))
        throw std::invalid_argument("fading: zero fade fraction must be in [0, 1)");
}

// Spectral amplitude profile: f^(alpha/2) below the knee, steep rolloff
// above it, continuous at the knee.
std::vector<double> amplitude_profile(std::size_t n, double dt_s, double alpha,
                                      double knee_hz) {
    const std::size_t nf = n / 2 + 1;
    std::vector<double> amp(nf - 1);
    const double df = 1.0 / (static_cast<double>(n) * dt_s);
    for (std::size_t k = 1; k < nf; ++k) {
        const double f = static_cast<double>(k) * df;
        const double r = f / knee_hz;
        amp[k - 1] = r <= 1.0 ? std::pow(r, 0.5 * alpha)
                              : std::pow(r, -4.0 / 3.0);
    }
    return amp;
}

// Lognormal transmittance from a unit-variance Gaussian; then the deepest
// fades are forced to zero and the mean is renormalized to exactly one.
std::vector<double> finish_trace(const std::vector<double>& g, double si,
                                 double zero_frac) {
    const std::size_t n = g.size();
    std::vector<double> t(n);
    const double s2 = std::log(1.0 + si);
    const double s = std::sqrt(s2);
    for (std::size_t i = 0; i < n; ++i)
        t[i] = std::exp(s * g[i] - 0.5 * s2);

    const auto nzero =
        static_cast<std::size_t>(std::llround(zero_frac * static_cast<double>(n)));
    if (nzero > 0) {
        std::vector<std::size_t> idx(n);
        std::iota(idx.begin(), idx.end(), 0);
        std::nth_element(idx.begin(), idx.begin() + (nzero - 1), idx.end(),
                         [&t](std::size_t a, std::size_t b) {
                             return t[a] != t[b] ? t[a] < t[b] : a < b;
                         });
        for (std::size_t i = 0; i < nzero; ++i) t[idx[i]] = 0.0;
    }

    const double sum = std::accumulate(t.begin(), t.end(), 0.0);
    if (sum > 0.0) {
        const double scale = static_cast<double>(n) / sum;
        for (double& v : t) v *= scale;
    }
    return t;
}

}  // namespace

std::vector<double> synthesize_fading(const FadingModel& model,
                                      double duration_s, std::uint64_t seed) {
    validate_fading(model);
    if (!(duration_s > 0.0))
        throw std::invalid_argument("fading: duration must be positive");
    const auto n = static_cast<std::size_t>(
        std::max<std::int64_t>(std::llround(duration_s / model.dt_s), 1));

    if (model.scintillation_index == 0.0)
        return finish_trace(std::vector<double>(n, 0.0), 0.0,
                            model.zero_fade_fraction);

    // Draw the white spectrum once; recoloring it during calibration keeps
    // the realization fixed while the shaping exponent moves.
    Rng rng(seed);
    const std::size_t nf = n / 2 + 1;
    std::vector<double> zre(nf - 1), zim(nf - 1);
    for (std::size_t k = 0; k + 1 < nf; ++k) {
        zre[k] = rng.normal();
        zim[k] = rng.normal();
    }

    auto build = [&](double alpha) {
        const std::vector<double> amp =
            amplitude_profile(n, model.dt_s, alpha, model.knee_hz);
        std::vector<double> g;
        {
            std::vector<fftw_complex> spec(nf);
            spec[0][0] = spec[0][1] = 0.0;
            const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
            for (std::size_t k = 1; k < nf; ++k) {
                const bool nyquist = n % 2 == 0 && k == nf - 1;
                const double a = amp[k - 1];
                spec[k][0] = a * (nyquist ? zre[k - 1] : zre[k - 1] * inv_sqrt2);
                spec[k][1] = nyquist ? 0.0 : a * zim[k - 1] * inv_sqrt2;
            }
            g.resize(n);
            fftw_plan plan;
            {
                std::lock_guard<std::mutex> lock(detail::fftw_planner_mutex());
                plan = fftw_plan_dft_c2r_1d(static_cast<int>(n), spec.data(),
                                            g.data(), FFTW_ESTIMATE);
            }
            if (!plan)
                throw std::runtime_error("synthesize_fading: fftw plan failed");
            fftw_execute(plan);
            {
                std::lock_guard<std::mutex> lock(detail::fftw_planner_mutex());
                fftw_destroy_plan(plan);
            }
            double var = 0.0;
            for (double v : g) var += v * v;
            var /= static_cast<double>(n);
            if (var > 0.0) {
                const double sc = 1.0 / std::sqrt(var);
                for (double& v : g) v *= sc;
            }
        }
        return finish_trace(g, model.scintillation_index,
                            model.zero_fade_fraction);
    };

    double alpha = model.exponent;
    std::vector<double> trace = build(alpha);

    // The exponentiation to a lognormal flattens the spectrum, more so at
    // high scintillation.  Close the loop: refit the realized slope below
    // the knee and steepen the shaping exponent until they agree.
    if (n >= 512) {
        for (int iter = 0; iter < 8; ++iter) {
            double slope;
            try {
                const Spectrum sp = psd(trace, model.dt_s);
                const double f_lo = sp.freqs_hz.front();
                const double f_hi =
                    std::min(model.knee_hz, sp.freqs_hz.back());
                slope = powerlaw_fit(sp, f_lo, f_hi).first;
            } catch (const std::invalid_argument&) {
                break;  // too few usable bins below the knee
            }
            const double err = model.exponent - slope;
            if (std::fabs(err) < 0.02) break;
            alpha += 0.9 * err;
            alpha = std::clamp(alpha, model.exponent - 4.0, -0.05);
            trace = build(alpha);
        }
    }
    return trace;
}

FadingTrace make_fading_trace(const FadingModel& model, Span span,
                              std::uint64_t seed) {
    FadingTrace tr;
    tr.start_ps = span.start_ps;
    tr.dt_s = model.dt_s;
    const double dur_s = span.length_s() + 2.0 * model.dt_s;
    tr.values = synthesize_fading(model, dur_s, seed);
    return tr;
}

double FadingTrace::at(std::int64_t t_ps) const {
    if (values.empty()) return 1.0;
    const double dt_ps = dt_s * kPsPerS;
    auto idx = static_cast<std::int64_t>(
        std::floor(static_cast<double>(t_ps - start_ps) / dt_ps));
    if (idx < 0) idx = 0;
    if (idx >= static_cast<std::int64_t>(values.size()))
        idx = static_cast<std::int64_t>(values.size()) - 1;
    return values[static_cast<std::size_t>(idx)];
}

bool FadingTrace::covers(Span s) const {
    const double dt_ps = dt_s * kPsPerS;
    const double end =
        static_cast<double>(start_ps) + dt_ps * static_cast<double>(values.size());
    return start_ps <= s.start_ps && static_cast<double>(s.end_ps) <= end;
}

}  // namespace qtwtt
