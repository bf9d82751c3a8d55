#include "qtwtt/spectral.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <mutex>
#include <numeric>
#include <stdexcept>

#include "shaped_noise.hpp"

namespace qtwtt {

namespace detail {

std::mutex& fftw_planner_mutex() {
    static std::mutex m;
    return m;
}

}  // namespace detail

double RateTrace::mean() const {
    if (counts.empty()) return 0.0;
    return std::accumulate(counts.begin(), counts.end(), 0.0) /
           static_cast<double>(counts.size());
}

RateTrace countrate_trace(const TimeTagStream& s, double dt_s) {
    if (!(dt_s > 0.0))
        throw std::invalid_argument("countrate_trace: dt must be positive");
    const double span_ps = static_cast<double>(s.span().length_ps());
    const double dt_ps = dt_s * kPsPerS;
    const auto nbins = static_cast<std::size_t>(std::ceil(span_ps / dt_ps));
    if (nbins < 2)
        throw std::invalid_argument("countrate_trace: span shorter than 2 dt");
    RateTrace t;
    t.dt_s = dt_s;
    t.start_ps = s.span().start_ps;
    t.counts.assign(nbins, 0.0);
    for (std::int64_t tag : s.tags()) {
        auto idx = static_cast<std::size_t>(
            static_cast<double>(tag - t.start_ps) / dt_ps);
        if (idx >= nbins) idx = nbins - 1;
        t.counts[idx] += 1.0;
    }
    return t;
}

Spectrum psd(const std::vector<double>& x, double dt_s) {
    const std::size_t n = x.size();
    if (n < 8) throw std::invalid_argument("psd: need at least 8 samples");
    if (!(dt_s > 0.0)) throw std::invalid_argument("psd: dt must be positive");
    const double fs = 1.0 / dt_s;

    std::size_t nseg = std::min(n, std::max<std::size_t>(n / 8, 64));
    const std::size_t step = std::max<std::size_t>(nseg / 2, 1);
    const std::size_t nsegments = (n - nseg) / step + 1;

    // Symmetric Hann taper.
    std::vector<double> w(nseg);
    double wss = 0.0;
    for (std::size_t k = 0; k < nseg; ++k) {
        w[k] = 0.5 - 0.5 * std::cos(2.0 * M_PI * static_cast<double>(k) /
                                    static_cast<double>(nseg - 1));
        wss += w[k] * w[k];
    }

    const std::size_t nfreq = nseg / 2 + 1;
    std::vector<double> acc(nfreq, 0.0);

    std::vector<double> in(nseg);
    std::vector<fftw_complex> out(nfreq);
    fftw_plan plan;
    {
        std::lock_guard<std::mutex> lock(detail::fftw_planner_mutex());
        plan = fftw_plan_dft_r2c_1d(static_cast<int>(nseg), in.data(),
                                    out.data(), FFTW_ESTIMATE);
    }
    if (!plan) throw std::runtime_error("psd: fftw plan failed");

    for (std::size_t seg = 0; seg < nsegments; ++seg) {
        const double* src = x.data() + seg * step;
        double m = 0.0;
        for (std::size_t k = 0; k < nseg; ++k) m += src[k];
        m = m / static_cast<double>(nseg);
        for (std::size_t k = 0; k < nseg; ++k) in[k] = (src[k] - m) * w[k];
        fftw_execute(plan);
        for (std::size_t k = 0; k < nfreq; ++k)
            acc[k] += out[k][0] * out[k][0] + out[k][1] * out[k][1];
    }
    {
        std::lock_guard<std::mutex> lock(detail::fftw_planner_mutex());
        fftw_destroy_plan(plan);
    }

    Spectrum s;
    s.freqs_hz.reserve(nfreq - 1);
    s.power.reserve(nfreq - 1);
    const double norm = 1.0 / (fs * wss * static_cast<double>(nsegments));
    const bool even = nseg % 2 == 0;
    for (std::size_t k = 1; k < nfreq; ++k) {
        double p = acc[k] * norm;
        const bool nyquist = even && k == nfreq - 1;
        if (!nyquist) p *= 2.0;  // fold the negative frequencies in
        s.freqs_hz.push_back(static_cast<double>(k) * fs /
                             static_cast<double>(nseg));
        s.power.push_back(p);
    }
    return s;
}

std::pair<double, double> powerlaw_fit(const Spectrum& s, double f_min_hz,
                                       double f_max_hz) {
    if (!(f_min_hz > 0.0) || !(f_max_hz > f_min_hz))
        throw std::invalid_argument("powerlaw_fit: bad frequency range");
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < s.size(); ++i) {
        const double f = s.freqs_hz[i];
        if (f < f_min_hz || f > f_max_hz) continue;
        const double p = s.power[i];
        if (!(p > 0.0)) continue;
        const double lx = std::log10(f);
        const double ly = std::log10(p);
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
        ++n;
    }
    if (n < 5)
        throw std::invalid_argument(
            "powerlaw_fit: fewer than five usable bins in range");
    const double dn = static_cast<double>(n);
    const double denom = dn * sxx - sx * sx;
    if (denom == 0.0)
        throw std::invalid_argument("powerlaw_fit: degenerate frequency range");
    const double slope = (dn * sxy - sx * sy) / denom;
    const double intercept = (sy - slope * sx) / dn;
    return {slope, std::pow(10.0, intercept)};
}

double psd_ratio_db(const Spectrum& a, const Spectrum& b, double f_hz) {
    auto nearest = [f_hz](const Spectrum& s) -> std::size_t {
        if (s.size() == 0)
            throw std::invalid_argument("psd_ratio_db: empty spectrum");
        if (f_hz < s.freqs_hz.front() || f_hz > s.freqs_hz.back())
            throw std::invalid_argument(
                "psd_ratio_db: frequency outside spectrum");
        auto it = std::lower_bound(s.freqs_hz.begin(), s.freqs_hz.end(), f_hz);
        std::size_t i = static_cast<std::size_t>(it - s.freqs_hz.begin());
        if (i == 0) return 0;
        if (i >= s.size()) return s.size() - 1;
        return (f_hz - s.freqs_hz[i - 1] <= s.freqs_hz[i] - f_hz) ? i - 1 : i;
    };
    const double pa = a.power[nearest(a)];
    const double pb = b.power[nearest(b)];
    if (!(pb > 0.0)) return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(pa / pb);
}

}  // namespace qtwtt
