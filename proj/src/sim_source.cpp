#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "qtwtt/rng.hpp"
#include "qtwtt/sim.hpp"

namespace qtwtt {

std::uint64_t role_seed(std::uint64_t master, SimRole role) {
    return derive_seed(master, static_cast<std::uint64_t>(role));
}

std::pair<TimeTagStream, TimeTagStream> generate_pairs(
    const PairSourceModel& src, double duration_s, std::uint64_t seed) {
    if (!(src.pair_rate_hz >= 0.0))
        throw std::invalid_argument("generate_pairs: pair rate must be >= 0");
    if (!(src.correlation_sigma_ps >= 0.0))
        throw std::invalid_argument(
            "generate_pairs: correlation sigma must be >= 0");
    if (!(duration_s > 0.0))
        throw std::invalid_argument("generate_pairs: duration must be > 0");

    Rng rng(seed);
    const std::vector<double> emissions =
        poisson_times(rng, src.pair_rate_hz, 0.0, duration_s);

    std::vector<std::int64_t> sig, idl;
    sig.reserve(emissions.size());
    idl.reserve(emissions.size());
    for (double e_s : emissions) {
        const double e_ps = e_s * kPsPerS;
        const double half = src.correlation_sigma_ps > 0.0
                                ? 0.5 * rng.normal(0.0, src.correlation_sigma_ps)
                                : 0.0;
        sig.push_back(std::llround(e_ps + half));
        idl.push_back(std::llround(e_ps - half));
    }
    std::sort(sig.begin(), sig.end());
    std::sort(idl.begin(), idl.end());

    const auto dur_ps = static_cast<std::int64_t>(std::llround(duration_s * kPsPerS));
    auto hull = [dur_ps](const std::vector<std::int64_t>& t) {
        Span s{0, dur_ps};
        if (!t.empty()) {
            s.start_ps = std::min(s.start_ps, t.front());
            s.end_ps = std::max(s.end_ps, t.back() + 1);
        }
        return s;
    };
    Span ss = hull(sig), si = hull(idl);
    // Shared span keeps the two streams window-aligned.
    Span common{std::min(ss.start_ps, si.start_ps),
                std::max(ss.end_ps, si.end_ps)};
    return {TimeTagStream(Channel("signal"), std::move(sig), common),
            TimeTagStream(Channel("idler"), std::move(idl), common)};
}

}  // namespace qtwtt
