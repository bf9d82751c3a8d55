#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "qtwtt/rng.hpp"
#include "qtwtt/sim.hpp"

namespace qtwtt {

namespace {

// Split a stream into two disjoint substreams by a fair coin per tag.
std::pair<TimeTagStream, TimeTagStream> split_stream(const TimeTagStream& in,
                                                     Channel first,
                                                     Channel second,
                                                     std::uint64_t seed) {
    Rng rng(seed);
    std::vector<std::int64_t> a, b;
    a.reserve(in.size() / 2 + 16);
    b.reserve(in.size() / 2 + 16);
    for (std::int64_t t : in.tags())
        (rng.uniform01() < 0.5 ? a : b).push_back(t);
    return {TimeTagStream(std::move(first), std::move(a), in.span()),
            TimeTagStream(std::move(second), std::move(b), in.span())};
}

TimeTagStream run_segment(const TimeTagStream& in, const ChannelModel& ch,
                          std::uint64_t master, SimRole seg_role,
                          SimRole fade_role) {
    if (!ch.fading) return propagate(in, ch, nullptr, role_seed(master, seg_role));
    const FadingTrace trace =
        make_fading_trace(*ch.fading, in.span(), role_seed(master, fade_role));
    return propagate(in, ch, &trace, role_seed(master, seg_role));
}

Span union_span(std::initializer_list<Span> spans) {
    Span u = *spans.begin();
    for (const Span& s : spans) {
        u.start_ps = std::min(u.start_ps, s.start_ps);
        u.end_ps = std::max(u.end_ps, s.end_ps);
    }
    return u;
}

}  // namespace

SimResult simulate_scenario(const ScenarioConfig& cfg) {
    if (!(cfg.run.duration_s > 0.0))
        throw std::invalid_argument("scenario: run duration must be positive");
    if (!(cfg.run.window_s > 0.0))
        throw std::invalid_argument("scenario: window length must be positive");
    if (!(cfg.idler_attenuation_db >= 0.0))
        throw std::invalid_argument("scenario: idler attenuation must be >= 0");
    if (cfg.clocks.mode == ClockTopology::two_clock && !cfg.clocks.remote)
        throw std::invalid_argument("scenario: two_clock mode needs a remote clock");

    const std::uint64_t master = cfg.run.seed;

    auto [sig, idl] = generate_pairs(cfg.source, cfg.run.duration_s,
                                     role_seed(master, SimRole::pair_generation));

    auto [sig_a, sig_b] =
        split_stream(sig, Channel("route_a"), Channel("route_b"),
                     role_seed(master, SimRole::route_split));
    auto [idl_3, idl_4] =
        split_stream(idl, Channel("idler_d3"), Channel("idler_d4"),
                     role_seed(master, SimRole::idler_split));

    // Route A: up through free space, back through fiber, onto D1.
    TimeTagStream a1 = run_segment(sig_a, cfg.fs_uplink, master,
                                   SimRole::seg_fs_uplink,
                                   SimRole::fade_fs_uplink);
    TimeTagStream a2 = run_segment(a1, cfg.fiber_return, master,
                                   SimRole::seg_fiber_return,
                                   SimRole::fade_fiber_return);

    // Route B: out through fiber, down through free space, onto D2.
    TimeTagStream b1 = run_segment(sig_b, cfg.fiber_out, master,
                                   SimRole::seg_fiber_out,
                                   SimRole::fade_fiber_out);
    TimeTagStream b2 = run_segment(b1, cfg.fs_downlink, master,
                                   SimRole::seg_fs_downlink,
                                   SimRole::fade_fs_downlink);

    // The heralding idlers stay local behind a fixed attenuation.
    ChannelModel idler_path;
    idler_path.mean_loss_db = cfg.idler_attenuation_db;
    const std::uint64_t att_seed = role_seed(master, SimRole::idler_attenuation);
    TimeTagStream i3 = propagate(idl_3, idler_path, nullptr,
                                 derive_seed(att_seed, 1));
    TimeTagStream i4 = propagate(idl_4, idler_path, nullptr,
                                 derive_seed(att_seed, 2));

    const Span all =
        union_span({a2.span(), b2.span(), i3.span(), i4.span()});
    const double clock_dt_s = 1e-3;
    const ClockPhase local = make_clock_phase(
        cfg.clocks.local, all, clock_dt_s, role_seed(master, SimRole::clock_local));
    ClockPhase remote = local;
    const bool two_clock = cfg.clocks.mode == ClockTopology::two_clock;
    if (two_clock)
        remote = make_clock_phase(*cfg.clocks.remote, all, clock_dt_s,
                                  role_seed(master, SimRole::clock_remote));

    // D1 and D4 sit at the far end of the comparison in two_clock mode.
    SimResult res;
    res.streams[0] = timestamp(with_channel(a2, Channel::d1()),
                               cfg.detectors[0], two_clock ? remote : local,
                               role_seed(master, SimRole::det_d1));
    res.streams[1] = timestamp(with_channel(b2, Channel::d2()),
                               cfg.detectors[1], local,
                               role_seed(master, SimRole::det_d2));
    res.streams[2] = timestamp(with_channel(i3, Channel::d3()),
                               cfg.detectors[2], local,
                               role_seed(master, SimRole::det_d3));
    res.streams[3] = timestamp(with_channel(i4, Channel::d4()),
                               cfg.detectors[3], two_clock ? remote : local,
                               role_seed(master, SimRole::det_d4));

    // Ground truth, sampled coarsely; segment drifts are evaluated at a
    // common emission epoch (propagation delays are negligible against
    // drift timescales).
    SimTruth& truth = res.truth;
    truth.dt_s = std::min(1.0, cfg.run.window_s);
    const auto n = static_cast<std::size_t>(
                       std::floor(cfg.run.duration_s / truth.dt_s)) +
                   1;
    auto seg_delay = [](const ChannelModel& ch, double t_s) {
        return ch.base_delay_ps + (ch.drift ? ch.drift->eval_ps(t_s) : 0.0);
    };
    truth.t_s.resize(n);
    truth.delay_a_ps.resize(n);
    truth.delay_b_ps.resize(n);
    truth.true_t0_ps.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double t = static_cast<double>(i) * truth.dt_s;
        truth.t_s[i] = t;
        const double da =
            seg_delay(cfg.fs_uplink, t) + seg_delay(cfg.fiber_return, t);
        const double db =
            seg_delay(cfg.fiber_out, t) + seg_delay(cfg.fs_downlink, t);
        truth.delay_a_ps[i] = da;
        truth.delay_b_ps[i] = db;
        if (two_clock) {
            const auto t_ps = static_cast<std::int64_t>(t * kPsPerS);
            truth.true_t0_ps[i] =
                (local.at(t_ps) - remote.at(t_ps)) * kPsPerS;
        } else {
            truth.true_t0_ps[i] = 0.5 * (db - da);
        }
    }
    truth.route_asymmetry_ps =
        0.5 * (truth.delay_b_ps[0] - truth.delay_a_ps[0]);
    return res;
}

}  // namespace qtwtt
