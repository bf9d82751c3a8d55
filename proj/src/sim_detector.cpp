#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "qtwtt/rng.hpp"
#include "qtwtt/sim.hpp"

namespace qtwtt {

TimeTagStream timestamp(const TimeTagStream& in, const DetectorModel& det,
                        const ClockPhase& phase, std::uint64_t seed) {
    if (!(det.efficiency >= 0.0) || !(det.efficiency <= 1.0))
        throw std::invalid_argument("timestamp: efficiency must be in [0, 1]");
    if (!(det.jitter_sigma_ps >= 0.0))
        throw std::invalid_argument("timestamp: jitter sigma must be >= 0");
    if (!(det.dark_rate_hz >= 0.0))
        throw std::invalid_argument("timestamp: dark rate must be >= 0");
    if (det.dead_time_ps < 0)
        throw std::invalid_argument("timestamp: dead time must be >= 0");
    if (!phase.covers(in.span()))
        throw std::invalid_argument("timestamp: clock phase does not cover span");

    Rng rng(seed);
    const Span s = in.span();

    // True-time detection instants (real-valued picoseconds).
    std::vector<double> events;
    events.reserve(in.size() + 16);
    for (std::int64_t t : in.tags()) {
        if (rng.uniform01() >= det.efficiency) continue;
        double tr = static_cast<double>(t);
        if (det.jitter_sigma_ps > 0.0)
            tr += rng.normal(0.0, det.jitter_sigma_ps);
        events.push_back(tr);
    }
    if (det.dark_rate_hz > 0.0) {
        const std::vector<double> darks =
            poisson_times(rng, det.dark_rate_hz,
                          static_cast<double>(s.start_ps) / kPsPerS,
                          static_cast<double>(s.end_ps) / kPsPerS);
        for (double d_s : darks) events.push_back(d_s * kPsPerS);
    }

    // Transform to the clock's timescale and quantize.
    std::vector<std::int64_t> stamped;
    stamped.reserve(events.size());
    for (double tr : events) {
        const double xl =
            phase.at(static_cast<std::int64_t>(std::llround(tr)));
        stamped.push_back(std::llround(tr + xl * kPsPerS));
    }
    std::sort(stamped.begin(), stamped.end());

    // Non-paralyzable dead time: drop tags closer than dead_time_ps to the
    // last kept one.
    std::vector<std::int64_t> kept;
    kept.reserve(stamped.size());
    std::int64_t last = 0;
    bool have_last = false;
    for (std::int64_t t : stamped) {
        if (have_last && t - last < det.dead_time_ps) continue;
        kept.push_back(t);
        last = t;
        have_last = true;
    }

    Span out_span{
        std::llround(static_cast<double>(s.start_ps) +
                     phase.at(s.start_ps) * kPsPerS),
        std::llround(static_cast<double>(s.end_ps) +
                     phase.at(s.end_ps) * kPsPerS)};
    if (out_span.end_ps < out_span.start_ps)
        std::swap(out_span.start_ps, out_span.end_ps);
    if (!kept.empty()) {
        out_span.start_ps = std::min(out_span.start_ps, kept.front());
        out_span.end_ps = std::max(out_span.end_ps, kept.back() + 1);
    }
    return TimeTagStream(in.channel(), std::move(kept), out_span);
}

}  // namespace qtwtt
