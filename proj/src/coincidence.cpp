#include "qtwtt/coincidence.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>

namespace qtwtt {

std::uint64_t CoincidenceHistogram::total() const {
    return std::accumulate(counts.begin(), counts.end(), std::uint64_t{0});
}

CoincidenceHistogram cross_correlate(const TimeTagStream& a,
                                     const TimeTagStream& b,
                                     std::int64_t window_ps,
                                     std::int64_t bin_width_ps,
                                     std::int64_t offset_guess_ps) {
    if (bin_width_ps < 1)
        throw std::invalid_argument("cross_correlate: bin width must be >= 1 ps");
    if (window_ps < bin_width_ps)
        throw std::invalid_argument("cross_correlate: window smaller than bin");
    if (window_ps % bin_width_ps != 0)
        throw std::invalid_argument(
            "cross_correlate: window not a multiple of bin width");

    CoincidenceHistogram h;
    h.bin_width_ps = bin_width_ps;
    // Bin centers sit at guess + k * bin_width, k = -W/b .. W/b.
    h.origin_ps = offset_guess_ps - window_ps - bin_width_ps / 2;
    const std::size_t nbins =
        static_cast<std::size_t>(2 * (window_ps / bin_width_ps)) + 1;
    h.counts.assign(nbins, 0);
    h.n_left = a.size();
    h.n_right = b.size();
    const std::int64_t ov_lo = std::max(a.span().start_ps, b.span().start_ps);
    const std::int64_t ov_hi = std::min(a.span().end_ps, b.span().end_ps);
    h.integration_s =
        ov_hi > ov_lo ? static_cast<double>(ov_hi - ov_lo) / kPsPerS : 0.0;

    const auto& ta = a.tags();
    const auto& tb = b.tags();
    std::size_t jlo = 0;
    for (std::int64_t t : ta) {
        const std::int64_t lo = t + offset_guess_ps - window_ps;
        const std::int64_t hi = t + offset_guess_ps + window_ps;
        while (jlo < tb.size() && tb[jlo] < lo) ++jlo;
        for (std::size_t j = jlo; j < tb.size() && tb[j] <= hi; ++j) {
            const std::int64_t d = tb[j] - t;
            auto idx = static_cast<std::size_t>((d - h.origin_ps) / bin_width_ps);
            if (idx >= nbins) idx = nbins - 1;
            ++h.counts[idx];
        }
    }
    return h;
}

namespace {

// Solve the 4x4 system M x = v in place; returns false when singular.
bool solve4(std::array<std::array<double, 4>, 4>& m, std::array<double, 4>& v,
            std::array<double, 4>& x) {
    std::array<int, 4> piv = {0, 1, 2, 3};
    for (int col = 0; col < 4; ++col) {
        int best = col;
        double mag = std::fabs(m[piv[col]][col]);
        for (int r = col + 1; r < 4; ++r) {
            double a = std::fabs(m[piv[r]][col]);
            if (a > mag) {
                mag = a;
                best = r;
            }
        }
        if (!(mag > 0.0) || !std::isfinite(mag)) return false;
        std::swap(piv[col], piv[best]);
        const int pr = piv[col];
        for (int r = col + 1; r < 4; ++r) {
            const int rr = piv[r];
            const double f = m[rr][col] / m[pr][col];
            for (int c = col; c < 4; ++c) m[rr][c] -= f * m[pr][c];
            v[rr] -= f * v[pr];
        }
    }
    for (int col = 3; col >= 0; --col) {
        const int pr = piv[col];
        double s = v[pr];
        for (int c = col + 1; c < 4; ++c) s -= m[pr][c] * x[c];
        x[col] = s / m[pr][col];
    }
    return std::isfinite(x[0]) && std::isfinite(x[1]) && std::isfinite(x[2]) &&
           std::isfinite(x[3]);
}

struct Params {
    double amp, center, sigma, base;
};

// Weighted sum of squared residuals.  The weights approximate the inverse
// Poisson variance of each bin and are held fixed across one outer iteration
// (iteratively reweighted least squares), so within an iteration this is an
// ordinary quadratic objective and damped steps decrease it monotonically.
double sse_of(const std::vector<double>& d, const std::vector<double>& y,
              const Params& p, const std::vector<double>& w) {
    double s = 0.0;
    for (std::size_t i = 0; i < d.size(); ++i) {
        const double z = (d[i] - p.center) / p.sigma;
        const double f = p.amp * std::exp(-0.5 * z * z) + p.base;
        const double r = y[i] - f;
        s += r * r * w[i];
    }
    return s;
}

}  // namespace

PeakFit fit_peak(const CoincidenceHistogram& h) {
    const std::size_t nb = h.size();
    if (nb < 3) throw NoPeakError("fit_peak: fewer than three bins");
    if (h.total() == 0) throw NoPeakError("fit_peak: empty histogram");

    const double bw = static_cast<double>(h.bin_width_ps);
    std::vector<double> d(nb), y(nb);
    for (std::size_t i = 0; i < nb; ++i) {
        d[i] = h.bin_center_ps(i);
        y[i] = static_cast<double>(h.counts[i]);
    }

    // Locate the peak with a matched-box scan: slide boxes of dyadic widths
    // across the histogram and score each box's content against the floor
    // level estimated from its complement.  Box sums stay statistically
    // meaningful even when the accidental floor is a fraction of a count
    // per bin, where bin-level statistics (median, raw moments) are blind.
    std::vector<double> prefix(nb + 1, 0.0);
    for (std::size_t i = 0; i < nb; ++i) prefix[i + 1] = prefix[i] + y[i];
    const double total = prefix[nb];
    if (!(total > 0.0)) throw NoPeakError("fit_peak: flat histogram");

    double best_score = -1.0;
    std::size_t best_i0 = 0;
    std::size_t best_w = 0;
    for (std::size_t wbox = 2;
         wbox < nb && wbox <= std::max<std::size_t>(2, nb / 3); wbox *= 2) {
        for (std::size_t i0 = 0; i0 + wbox <= nb; ++i0) {
            const double s = prefix[i0 + wbox] - prefix[i0];
            const double floor_here = (total - s) /
                                      static_cast<double>(nb - wbox) *
                                      static_cast<double>(wbox);
            const double score = (s - floor_here) / std::sqrt(floor_here + 1.0);
            if (score > best_score) {
                best_score = score;
                best_i0 = i0;
                best_w = wbox;
            }
        }
    }
    if (best_w == 0 || best_score < 5.0)
        throw NoPeakError("fit_peak: no bin run clears the accidental floor");

    // Floor per bin from everything outside the winning box.
    const double b0 = (total - (prefix[best_i0 + best_w] - prefix[best_i0])) /
                      static_cast<double>(nb - best_w);

    // Floor-subtracted moments in and around the box.
    const std::size_t lo_i = best_i0 > best_w ? best_i0 - best_w : 0;
    const std::size_t hi_i = std::min(nb, best_i0 + 2 * best_w);
    double ymax = 0.0;
    double c1 = 0.0, sig1 = 0.0;
    {
        double s = 0, sx = 0;
        for (std::size_t i = lo_i; i < hi_i; ++i) {
            ymax = std::max(ymax, y[i]);
            const double w = std::max(y[i] - b0, 0.0);
            s += w;
            sx += w * d[i];
        }
        if (!(s > 0.0)) throw NoPeakError("fit_peak: no counts above baseline");
        c1 = sx / s;
        double sxx = 0;
        for (std::size_t i = lo_i; i < hi_i; ++i) {
            const double w = std::max(y[i] - b0, 0.0);
            sxx += w * (d[i] - c1) * (d[i] - c1);
        }
        sig1 = std::max(std::sqrt(sxx / s), bw / std::sqrt(12.0));
    }
    const double a0 = std::max(ymax - b0, 1e-3);

    PeakFit out;

    std::size_t support = 0;
    for (std::size_t i = lo_i; i < hi_i; ++i)
        if (y[i] > b0 + 0.25 * a0) ++support;

    if (support < 4 || sig1 < 0.5 * bw) {
        // Peak narrower than the binning supports a 4-parameter fit for;
        // report moment estimates so that noiseless narrow peaks stay exact.
        out.center_ps = c1;
        out.sigma_ps = sig1;
        out.amplitude = a0;
        out.baseline = b0;
        double pc = 0;
        for (std::size_t i = lo_i; i < hi_i; ++i)
            pc += std::max(y[i] - b0, 0.0);
        out.pair_count = pc;
    } else {
        // Fit in coordinates centered on the moment estimate so the normal
        // equations stay well conditioned for arbitrarily large delays.
        std::vector<double> u(nb);
        for (std::size_t i = 0; i < nb; ++i) u[i] = d[i] - c1;
        Params p{a0, 0.0, sig1, b0};
        std::vector<double> wts(nb, 1.0);
        double lambda = 1e-3;
        bool converged = false;
        for (int iter = 0; iter < 200 && !converged; ++iter) {
            // Refresh the inverse-variance weights from the current model,
            // floored at one count so empty stretches cannot dominate, then
            // hold them fixed for the rest of this iteration.
            std::array<std::array<double, 4>, 4> jtj{};
            std::array<double, 4> jtr{};
            for (std::size_t i = 0; i < nb; ++i) {
                const double z = (u[i] - p.center) / p.sigma;
                const double e = std::exp(-0.5 * z * z);
                const double f = p.amp * e + p.base;
                const double r = y[i] - f;
                const double w = 1.0 / std::max(f, 1.0);
                wts[i] = w;
                const std::array<double, 4> g = {
                    e, p.amp * e * z / p.sigma, p.amp * e * z * z / p.sigma,
                    1.0};
                for (int a = 0; a < 4; ++a) {
                    jtr[a] += g[a] * r * w;
                    for (int v = a; v < 4; ++v) jtj[a][v] += g[a] * g[v] * w;
                }
            }
            for (int a = 1; a < 4; ++a)
                for (int v = 0; v < a; ++v) jtj[a][v] = jtj[v][a];

            bool accepted = false;
            double sse = sse_of(u, y, p, wts);
            const double sse_before = sse;
            std::array<double, 4> step{};
            // Actual movement of the accepted iterate, after the positivity
            // clamps; a parameter pinned at its bound must read as zero
            // motion or convergence can never be detected.
            std::array<double, 4> moved{};
            for (int tries = 0; tries < 25 && !accepted; ++tries) {
                auto m = jtj;
                for (int a = 0; a < 4; ++a)
                    m[a][a] += lambda * std::max(jtj[a][a], 1e-30);
                auto v = jtr;
                if (!solve4(m, v, step)) {
                    lambda *= 10.0;
                    continue;
                }
                Params q{std::max(p.amp + step[0], 0.0), p.center + step[1],
                         std::max(p.sigma + step[2], 0.3 * bw),
                         std::max(p.base + step[3], 0.0)};
                const double sse_q = sse_of(u, y, q, wts);
                if (sse_q <= sse) {
                    moved = {q.amp - p.amp, q.center - p.center,
                             q.sigma - p.sigma, q.base - p.base};
                    p = q;
                    sse = sse_q;
                    lambda = std::max(lambda / 3.0, 1e-12);
                    accepted = true;
                } else {
                    lambda *= 10.0;
                }
            }
            if (!accepted) {
                // No damped step improves the objective even as the damping
                // drives the step to zero: numerically stationary.
                converged = true;
                break;
            }
            const double xtol = 1e-7;
            const double wref = std::max(p.sigma, bw);
            const bool xsmall =
                std::fabs(moved[0]) < xtol * std::max(p.amp, 1.0) &&
                std::fabs(moved[1]) < xtol * wref &&
                std::fabs(moved[2]) < xtol * wref &&
                std::fabs(moved[3]) < xtol * std::max(p.base, 1.0);
            const bool fsmall =
                sse_before - sse <= 1e-10 * std::max(sse_before, 1e-300);
            converged = xsmall || fsmall;
        }
        if (!converged)
            throw NonConvergenceError("fit_peak: iteration cap reached");
        out.center_ps = c1 + p.center;
        out.sigma_ps = p.sigma;
        out.amplitude = p.amp;
        out.baseline = p.base;
        out.pair_count = p.amp * p.sigma * std::sqrt(2.0 * M_PI) / bw;
    }

    out.fwhm_ps = convert_width(out.sigma_ps, WidthConvention::sigma,
                                WidthConvention::fwhm);
    // Pearson residuals against the fitted model, variance floor of one count.
    {
        double chi2 = 0;
        for (std::size_t i = 0; i < nb; ++i) {
            const double z = (d[i] - out.center_ps) / out.sigma_ps;
            const double f = out.amplitude * std::exp(-0.5 * z * z) + out.baseline;
            chi2 += (y[i] - f) * (y[i] - f) / std::max(f, 1.0);
        }
        out.reduced_chi2 = nb > 4 ? chi2 / static_cast<double>(nb - 4) : 0.0;
    }
    out.car = estimate_car(h, out);
    return out;
}

double estimate_car(const CoincidenceHistogram& h, const PeakFit& fit) {
    // Count every bin whose support overlaps the +-3 sigma interval (hence
    // the half-bin margin); a center-only test would flip boundary bins in
    // and out on sub-permille changes of the fitted width.
    const double half_bw = 0.5 * static_cast<double>(h.bin_width_ps);
    const double lo = fit.center_ps - 3.0 * fit.sigma_ps - half_bw;
    const double hi = fit.center_ps + 3.0 * fit.sigma_ps + half_bw;
    double sum = 0;
    std::size_t nwin = 0;
    std::size_t nearest = 0;
    double best = std::numeric_limits<double>::max();
    for (std::size_t i = 0; i < h.size(); ++i) {
        const double c = h.bin_center_ps(i);
        const double dist = std::fabs(c - fit.center_ps);
        if (dist < best) {
            best = dist;
            nearest = i;
        }
        if (c >= lo && c <= hi) {
            sum += static_cast<double>(h.counts[i]);
            ++nwin;
        }
    }
    if (nwin == 0) {
        sum = static_cast<double>(h.counts[nearest]);
        nwin = 1;
    }
    const double n_acc = fit.baseline * static_cast<double>(nwin);
    if (!(n_acc > 0.0)) return std::numeric_limits<double>::infinity();
    const double n_true = std::max(sum - n_acc, 0.0);
    return n_true / n_acc;
}

double convert_width(double value, WidthConvention from, WidthConvention to) {
    if (!(value >= 0.0) || !std::isfinite(value))
        throw std::invalid_argument("convert_width: width must be nonnegative");
    auto factor = [](WidthConvention w) {
        switch (w) {
            case WidthConvention::sigma: return 1.0;
            case WidthConvention::fwhm: return 2.0 * std::sqrt(2.0 * std::log(2.0));
            case WidthConvention::one_over_e_half: return std::sqrt(2.0);
            case WidthConvention::one_over_e_full: return 2.0 * std::sqrt(2.0);
        }
        return 1.0;
    };
    return value / factor(from) * factor(to);
}

}  // namespace qtwtt
