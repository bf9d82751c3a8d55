#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "qtwtt/rng.hpp"
#include "qtwtt/sim.hpp"

namespace qtwtt {

double DriftSpec::eval_ps(double t_s) const {
    switch (shape) {
        case DriftShape::sinusoid:
            return amplitude_ps * std::sin(2.0 * M_PI * t_s / period_s);
        case DriftShape::linear_ramp:
            return amplitude_ps * (t_s / period_s);
        case DriftShape::piecewise_table: {
            if (table_s_ps.empty()) return 0.0;
            if (t_s <= table_s_ps.front().first)
                return table_s_ps.front().second;
            if (t_s >= table_s_ps.back().first) return table_s_ps.back().second;
            auto it = std::lower_bound(
                table_s_ps.begin(), table_s_ps.end(), t_s,
                [](const std::pair<double, double>& a, double t) {
                    return a.first < t;
                });
            const auto& hi = *it;
            const auto& lo = *(it - 1);
            const double f = (t_s - lo.first) / (hi.first - lo.first);
            return lo.second + f * (hi.second - lo.second);
        }
    }
    return 0.0;
}

TimeTagStream propagate(const TimeTagStream& in, const ChannelModel& ch,
                        const FadingTrace* fading, std::uint64_t seed) {
    if (!(ch.mean_loss_db >= 0.0))
        throw std::invalid_argument("propagate: mean loss must be >= 0 dB");
    if (!(ch.jitter_sigma_ps >= 0.0))
        throw std::invalid_argument("propagate: jitter sigma must be >= 0");
    if (ch.drift && ch.drift->shape != DriftShape::piecewise_table &&
        !(ch.drift->period_s > 0.0))
        throw std::invalid_argument("propagate: drift period must be positive");
    if (fading && !fading->covers(in.span()))
        throw std::invalid_argument("propagate: fading trace does not cover span");

    const double p_mean = std::pow(10.0, -ch.mean_loss_db / 10.0);
    Rng rng(seed);

    auto delay_at = [&ch](double t_s) {
        return ch.base_delay_ps + (ch.drift ? ch.drift->eval_ps(t_s) : 0.0);
    };

    std::vector<std::int64_t> out;
    out.reserve(static_cast<std::size_t>(
        static_cast<double>(in.size()) * std::min(p_mean, 1.0) * 1.1 + 16.0));
    for (std::int64_t t : in.tags()) {
        const double u = rng.uniform01();
        const double p =
            std::min(p_mean * (fading ? fading->at(t) : 1.0), 1.0);
        if (u >= p) continue;
        const double t_s = static_cast<double>(t) / kPsPerS;
        double shifted = static_cast<double>(t) + delay_at(t_s);
        if (ch.jitter_sigma_ps > 0.0)
            shifted += rng.normal(0.0, ch.jitter_sigma_ps);
        out.push_back(std::llround(shifted));
    }
    std::sort(out.begin(), out.end());

    Span s = in.span();
    Span shifted_span{
        std::llround(static_cast<double>(s.start_ps) +
                     delay_at(static_cast<double>(s.start_ps) / kPsPerS)),
        std::llround(static_cast<double>(s.end_ps) +
                     delay_at(static_cast<double>(s.end_ps) / kPsPerS))};
    if (shifted_span.end_ps < shifted_span.start_ps)
        std::swap(shifted_span.start_ps, shifted_span.end_ps);
    if (!out.empty()) {
        shifted_span.start_ps = std::min(shifted_span.start_ps, out.front());
        shifted_span.end_ps = std::max(shifted_span.end_ps, out.back() + 1);
    }
    return TimeTagStream(in.channel(), std::move(out), shifted_span);
}

}  // namespace qtwtt
