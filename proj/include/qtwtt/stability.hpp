#pragma once
// Time-domain stability statistics on evenly spaced phase data.
//
// Input is a phase (time error) series x_i in seconds sampled every
// tau0_s.  Gaps are carried as an explicit validity mask so that missing
// analysis windows keep the index spacing intact; any difference term
// touching an invalid sample is excluded from the sums and from the term
// counts.

#include <cstddef>
#include <vector>

namespace qtwtt {

struct PhaseSeries {
    std::vector<double> x_s;     // phase values, seconds
    double tau0_s = 1.0;         // sample spacing, seconds
    std::vector<bool> valid;     // empty means all valid

    std::size_t size() const { return x_s.size(); }
    bool is_valid(std::size_t i) const { return valid.empty() || valid[i]; }
};

// Overlapping Allan deviation at averaging factor m (tau = m * tau0).
// Requires 1 <= m and 2*m + 1 <= size.
double adev(const PhaseSeries& p, std::size_t m);

// Modified Allan deviation at averaging factor m.
// Requires 1 <= m and 3*m + 1 <= size.  At m == 1 the sum reduces to the
// overlapping Allan sum term for term, so mdev(p, 1) == adev(p, 1) exactly.
double mdev(const PhaseSeries& p, std::size_t m);

// Time deviation: tdev = (m * tau0 / sqrt(3)) * mdev.
double tdev(const PhaseSeries& p, std::size_t m);

// Aligned per-tau stability table; tdev[i] is (taus_s[i]/sqrt(3))*mdev[i]
// by construction.
struct StabilitySeries {
    std::vector<double> taus_s;
    std::vector<double> adev;
    std::vector<double> mdev;
    std::vector<double> tdev;
    std::vector<std::size_t> n_terms;  // valid terms in each mdev sum

    std::size_t size() const { return taus_s.size(); }
};

// Deviations at each requested averaging factor.  m_values must be
// ascending and each valid for the series length.
StabilitySeries stability_curve(const PhaseSeries& p,
                                const std::vector<std::size_t>& m_values);

// Octave grid 1, 2, 4, ... limited so every m admits at least min_terms
// mdev terms.
std::vector<std::size_t> octave_m_grid(std::size_t n, std::size_t min_terms = 4);

enum class DevKind { adev, mdev, tdev };

// Least-squares slope of log10(dev) vs log10(tau) over points with
// tau in [tau_min_s, tau_max_s].  Needs at least three usable points.
double loglog_slope(const StabilitySeries& c, DevKind kind, double tau_min_s,
                    double tau_max_s);

// Two-sided confidence bounds on a deviation estimate, treating the
// normalized variance as chi-squared with equivalent degrees of freedom
// equal to the term count.  Reported alongside curves as a rough guide;
// no analysis decision depends on it.
struct DevConfidence {
    double lo = 0.0;
    double hi = 0.0;
};
DevConfidence dev_confidence(double dev, std::size_t n_terms,
                             double confidence = 0.683);

// 1-sigma relative error on a deviation estimated from n_terms terms.
double dev_rel_error(std::size_t n_terms);

}  // namespace qtwtt
