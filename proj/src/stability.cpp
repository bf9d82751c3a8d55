#include "qtwtt/stability.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace qtwtt {

namespace {

// Second differences d_i = x[i+2m] - 2 x[i+m] + x[i] and their validity.
void second_differences(const PhaseSeries& p, std::size_t m,
                        std::vector<double>& d, std::vector<char>& dv) {
    const std::size_t n = p.size();
    const std::size_t nd = n - 2 * m;
    d.resize(nd);
    dv.resize(nd);
    const auto& x = p.x_s;
    for (std::size_t i = 0; i < nd; ++i) {
        bool ok = p.is_valid(i) && p.is_valid(i + m) && p.is_valid(i + 2 * m);
        dv[i] = ok ? 1 : 0;
        d[i] = ok ? x[i + 2 * m] - 2.0 * x[i + m] + x[i] : 0.0;
    }
}

double mdev_counted(const PhaseSeries& p, std::size_t m, std::size_t* n_terms) {
    const std::size_t n = p.size();
    if (m < 1 || 3 * m + 1 > n)
        throw std::invalid_argument("mdev: m out of range for series length");
    std::vector<double> d;
    std::vector<char> dv;
    second_differences(p, m, d, dv);
    const double tau = static_cast<double>(m) * p.tau0_s;
    double sum = 0.0;
    std::size_t cnt = 0;

    if (m == 1) {
        // Window length 1: the inner average is the bare second difference,
        // so the sum coincides with the overlapping Allan sum exactly.
        for (std::size_t i = 0; i < d.size(); ++i) {
            if (!dv[i]) continue;
            sum += d[i] * d[i];
            ++cnt;
        }
        if (cnt == 0) throw std::invalid_argument("mdev: no valid terms");
        if (n_terms) *n_terms = cnt;
        return std::sqrt(sum /
                         (((2.0 * tau) * tau) * static_cast<double>(cnt)));
    }

    const std::size_t nterm = n - 3 * m + 1;
    double s = 0.0;
    std::size_t bad = 0;
    for (std::size_t i = 0; i < m; ++i) {
        if (dv[i]) s += d[i];
        else ++bad;
    }
    for (std::size_t j = 0;; ++j) {
        if (j % 4096 == 0 && j > 0) {
            // Rebuild the window sum to stop float drift from accumulating.
            s = 0.0;
            bad = 0;
            for (std::size_t i = j; i < j + m; ++i) {
                if (dv[i]) s += d[i];
                else ++bad;
            }
        }
        if (bad == 0) {
            sum += s * s;
            ++cnt;
        }
        if (j + 1 >= nterm) break;
        if (dv[j]) s -= d[j];
        else --bad;
        if (dv[j + m]) s += d[j + m];
        else ++bad;
    }
    if (cnt == 0) throw std::invalid_argument("mdev: no valid terms");
    if (n_terms) *n_terms = cnt;
    const double mm = static_cast<double>(m);
    return std::sqrt(sum / ((((2.0 * (mm * mm)) * tau) * tau) *
                            static_cast<double>(cnt)));
}

}  // namespace

double adev(const PhaseSeries& p, std::size_t m) {
    const std::size_t n = p.size();
    if (m < 1 || 2 * m + 1 > n)
        throw std::invalid_argument("adev: m out of range for series length");
    std::vector<double> d;
    std::vector<char> dv;
    second_differences(p, m, d, dv);
    double sum = 0.0;
    std::size_t cnt = 0;
    for (std::size_t i = 0; i < d.size(); ++i) {
        if (!dv[i]) continue;
        sum += d[i] * d[i];
        ++cnt;
    }
    if (cnt == 0) throw std::invalid_argument("adev: no valid terms");
    const double tau = static_cast<double>(m) * p.tau0_s;
    return std::sqrt(sum / (((2.0 * tau) * tau) * static_cast<double>(cnt)));
}

double mdev(const PhaseSeries& p, std::size_t m) {
    return mdev_counted(p, m, nullptr);
}

double tdev(const PhaseSeries& p, std::size_t m) {
    const double tau = static_cast<double>(m) * p.tau0_s;
    return tau / std::sqrt(3.0) * mdev(p, m);
}

StabilitySeries stability_curve(const PhaseSeries& p,
                                const std::vector<std::size_t>& m_values) {
    StabilitySeries c;
    std::size_t prev = 0;
    for (std::size_t m : m_values) {
        if (m <= prev)
            throw std::invalid_argument("stability_curve: m values not ascending");
        prev = m;
        const double tau = static_cast<double>(m) * p.tau0_s;
        std::size_t cnt = 0;
        const double md = mdev_counted(p, m, &cnt);
        c.taus_s.push_back(tau);
        c.adev.push_back(adev(p, m));
        c.mdev.push_back(md);
        c.tdev.push_back(tau / std::sqrt(3.0) * md);
        c.n_terms.push_back(cnt);
    }
    return c;
}

std::vector<std::size_t> octave_m_grid(std::size_t n, std::size_t min_terms) {
    std::vector<std::size_t> ms;
    if (min_terms < 1) min_terms = 1;
    for (std::size_t m = 1; 3 * m + 1 <= n && n - 3 * m + 1 >= min_terms;
         m *= 2)
        ms.push_back(m);
    return ms;
}

double loglog_slope(const StabilitySeries& c, DevKind kind, double tau_min_s,
                    double tau_max_s) {
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < c.size(); ++i) {
        const double tau = c.taus_s[i];
        if (tau < tau_min_s || tau > tau_max_s) continue;
        double v = kind == DevKind::adev  ? c.adev[i]
                   : kind == DevKind::mdev ? c.mdev[i]
                                           : c.tdev[i];
        if (!(v > 0.0)) continue;
        double lx = std::log10(tau);
        double ly = std::log10(v);
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
        ++n;
    }
    if (n < 3)
        throw std::invalid_argument("loglog_slope: fewer than three points in range");
    const double dn = static_cast<double>(n);
    const double denom = dn * sxx - sx * sx;
    if (denom == 0.0)
        throw std::invalid_argument("loglog_slope: degenerate tau range");
    return (dn * sxy - sx * sy) / denom;
}

namespace {

// Abramowitz-Stegun style rational approximation of the standard normal
// quantile; adequate for reporting confidence bounds.
double normal_quantile(double p) {
    if (!(p > 0.0) || !(p < 1.0))
        throw std::invalid_argument("normal_quantile: p must be in (0, 1)");
    const bool upper = p > 0.5;
    const double pp = upper ? 1.0 - p : p;
    const double t = std::sqrt(-2.0 * std::log(pp));
    const double c0 = 2.515517, c1 = 0.802853, c2 = 0.010328;
    const double d1 = 1.432788, d2 = 0.189269, d3 = 0.001308;
    double z = t - (c0 + c1 * t + c2 * t * t) /
                       (1.0 + d1 * t + d2 * t * t + d3 * t * t * t);
    return upper ? z : -z;
}

// Wilson-Hilferty chi-squared quantile approximation.
double chi2_quantile(double p, double k) {
    const double z = normal_quantile(p);
    const double a = 2.0 / (9.0 * k);
    const double c = 1.0 - a + z * std::sqrt(a);
    return k * c * c * c;
}

}  // namespace

DevConfidence dev_confidence(double dev, std::size_t n_terms,
                             double confidence) {
    if (!(dev >= 0.0))
        throw std::invalid_argument("dev_confidence: deviation must be >= 0");
    if (!(confidence > 0.0) || !(confidence < 1.0))
        throw std::invalid_argument("dev_confidence: confidence must be in (0, 1)");
    if (n_terms == 0) return {0.0, std::numeric_limits<double>::infinity()};
    const double edf = static_cast<double>(n_terms);
    const double alpha = 1.0 - confidence;
    const double hi_q = chi2_quantile(1.0 - alpha / 2.0, edf);
    const double lo_q = chi2_quantile(alpha / 2.0, edf);
    DevConfidence ci;
    ci.lo = hi_q > 0.0 ? dev * std::sqrt(edf / hi_q) : 0.0;
    ci.hi = lo_q > 0.0 ? dev * std::sqrt(edf / lo_q)
                       : std::numeric_limits<double>::infinity();
    return ci;
}

double dev_rel_error(std::size_t n_terms) {
    if (n_terms == 0) return std::numeric_limits<double>::infinity();
    return 1.0 / std::sqrt(2.0 * static_cast<double>(n_terms));
}

}  // namespace qtwtt
