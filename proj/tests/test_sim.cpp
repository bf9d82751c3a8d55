#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "qtwtt/rng.hpp"
#include "qtwtt/sim.hpp"
#include "qtwtt/spectral.hpp"
#include "qtwtt/stability.hpp"
#include "qtwtt/twtt.hpp"

using namespace qtwtt;

namespace {

double sample_sd(const std::vector<double>& v) {
    double mean = 0;
    for (double x : v) mean += x;
    mean /= static_cast<double>(v.size());
    double ss = 0;
    for (double x : v) ss += (x - mean) * (x - mean);
    return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

ScenarioConfig clean_scenario() {
    ScenarioConfig cfg;
    cfg.source.pair_rate_hz = 2e4;
    cfg.source.correlation_sigma_ps = 0.0;
    cfg.fs_uplink.base_delay_ps = 1'000'000;
    cfg.fiber_return.base_delay_ps = 1'000'000;
    cfg.fiber_out.base_delay_ps = 1'000'000;
    cfg.fs_downlink.base_delay_ps = 1'000'000;
    for (auto& d : cfg.detectors) {
        d.efficiency = 1.0;
        d.jitter_sigma_ps = 0.0;
        d.dark_rate_hz = 0.0;
        d.dead_time_ps = 0;
    }
    cfg.run.duration_s = 4.0;
    cfg.run.window_s = 1.0;
    cfg.run.seed = 7;
    return cfg;
}

}  // namespace

TEST_CASE("pair generation basics") {
    PairSourceModel src{1e6, 50.0};
    CHECK_THROWS_AS(generate_pairs(src, 0.0, 1), std::invalid_argument);

    const auto [s1, i1] = generate_pairs(src, 1.0, 2);
    CHECK(s1.size() == i1.size());
    // 5-sigma Poisson bound around rate * duration.
    CHECK(std::fabs(static_cast<double>(s1.size()) - 1e6) < 5e3);

    const auto [s2, i2] = generate_pairs(src, 1.0, 2);
    CHECK(s2.tags() == s1.tags());  // deterministic per seed
    const auto [s3, i3] = generate_pairs(src, 1.0, 3);
    CHECK(s3.tags() != s1.tags());
}

TEST_CASE("signal-idler differences carry the correlation width") {
    // Rate low enough that sorting cannot cross pairs.
    PairSourceModel src{1e4, 50.0};
    const auto [sig, idl] = generate_pairs(src, 10.0, 11);
    REQUIRE(sig.size() == idl.size());
    REQUIRE(sig.size() > 90000);
    std::vector<double> diffs(sig.size());
    for (std::size_t k = 0; k < sig.size(); ++k)
        diffs[k] = static_cast<double>(sig.tags()[k] - idl.tags()[k]);
    CHECK(sample_sd(diffs) == doctest::Approx(50.0).epsilon(0.02));
}

TEST_CASE("fading trace noiseless limit and zero-count bookkeeping") {
    FadingModel quiet;
    quiet.scintillation_index = 0.0;
    quiet.zero_fade_fraction = 0.0;
    const auto ones = synthesize_fading(quiet, 2.0, 5);
    CHECK(ones.size() == 2000);
    for (double v : ones) CHECK(v == 1.0);

    FadingModel f;
    f.scintillation_index = 1.0;
    f.zero_fade_fraction = 0.0336;
    const auto tr = synthesize_fading(f, 10.0, 6);
    REQUIRE(tr.size() == 10000);
    std::size_t zeros = 0;
    double mean = 0.0;
    for (double v : tr) {
        CHECK(v >= 0.0);
        if (v == 0.0) ++zeros;
        mean += v;
    }
    mean /= static_cast<double>(tr.size());
    CHECK(zeros == 336);  // deepest round(fraction * n) samples clamp to zero
    CHECK(mean == doctest::Approx(1.0).epsilon(1e-9));

    CHECK_THROWS_AS(synthesize_fading(f, 0.0, 1), std::invalid_argument);
    CHECK(synthesize_fading(f, 1e-4, 1).size() == 1);  // clamped to one sample
}

TEST_CASE("fading trace realizes the target spectral slope and variance") {
    FadingModel f;
    f.scintillation_index = 1.0;
    f.zero_fade_fraction = 0.0;
    const auto tr = synthesize_fading(f, 10.0, 17);
    const auto sp = psd(tr, f.dt_s);
    const auto fit = powerlaw_fit(sp, sp.freqs_hz.front(), 20.0);
    CHECK(fit.first > -0.82);
    CHECK(fit.first < -0.52);

    double mean = 0.0, var = 0.0;
    for (double v : tr) mean += v;
    mean /= static_cast<double>(tr.size());
    for (double v : tr) var += (v - mean) * (v - mean);
    var /= static_cast<double>(tr.size());
    CHECK(var / (mean * mean) == doctest::Approx(1.0).epsilon(0.35));
}

TEST_CASE("drift shapes evaluate as specified") {
    DriftSpec sin_d{DriftShape::sinusoid, 250.0, 100.0, {}};
    CHECK(sin_d.eval_ps(0.0) == doctest::Approx(0.0));
    CHECK(sin_d.eval_ps(25.0) == doctest::Approx(250.0));
    CHECK(sin_d.eval_ps(75.0) == doctest::Approx(-250.0));

    DriftSpec ramp{DriftShape::linear_ramp, 100.0, 50.0, {}};
    CHECK(ramp.eval_ps(0.0) == doctest::Approx(0.0));
    CHECK(ramp.eval_ps(25.0) == doctest::Approx(50.0));
    CHECK(ramp.eval_ps(50.0) == doctest::Approx(100.0));

    DriftSpec tab{DriftShape::piecewise_table, 0, 1.0,
                  {{0.0, 10.0}, {10.0, 30.0}, {20.0, 30.0}}};
    CHECK(tab.eval_ps(-5.0) == doctest::Approx(10.0));  // clamped ends
    CHECK(tab.eval_ps(5.0) == doctest::Approx(20.0));
    CHECK(tab.eval_ps(25.0) == doctest::Approx(30.0));
}

TEST_CASE("lossless channel shifts tags exactly") {
    std::vector<std::int64_t> tags;
    for (int i = 0; i < 1000; ++i) tags.push_back(i * 997);
    const TimeTagStream in(Channel("route_a"), tags, Span{0, 1'000'000});
    ChannelModel ch;
    ch.base_delay_ps = 1000.0;
    const auto out = propagate(in, ch, nullptr, 3);
    REQUIRE(out.size() == in.size());
    for (std::size_t k = 0; k < out.size(); ++k)
        CHECK(out.tags()[k] == in.tags()[k] + 1000);
    CHECK(out.span().start_ps == 1000);
    CHECK(out.span().end_ps == 1'001'000);
}

TEST_CASE("loss thins binomially and composes additively") {
    Rng rng(9);
    std::vector<std::int64_t> tags(100000);
    for (auto& t : tags)
        t = static_cast<std::int64_t>(rng.uniform01() * 1e9);
    const auto in = TimeTagStream::from_unsorted(Channel("x"), std::move(tags),
                                                 Span{0, 1'000'000'000});
    ChannelModel ten;
    ten.mean_loss_db = 10.0;
    const auto out10 = propagate(in, ten, nullptr, 21);
    CHECK(std::fabs(static_cast<double>(out10.size()) - 1e4) < 500.0);

    ChannelModel three, seven;
    three.mean_loss_db = 3.0;
    seven.mean_loss_db = 7.0;
    const auto chained = propagate(propagate(in, three, nullptr, 22), seven,
                                   nullptr, 23);
    // Same expectation as a single 10 dB step; compare within joint 5 sigma.
    CHECK(std::fabs(static_cast<double>(chained.size()) -
                    static_cast<double>(out10.size())) < 670.0);
}

TEST_CASE("channel jitter adds the configured timing spread") {
    std::vector<std::int64_t> tags;
    for (int i = 0; i < 50000; ++i) tags.push_back(i * 10000);
    const TimeTagStream in(Channel("x"), tags, Span{0, 500'000'000});
    ChannelModel ch;
    ch.jitter_sigma_ps = 50.0;
    const auto out = propagate(in, ch, nullptr, 31);
    REQUIRE(out.size() == in.size());
    std::vector<double> diffs(out.size());
    for (std::size_t k = 0; k < out.size(); ++k)
        diffs[k] = static_cast<double>(out.tags()[k] - in.tags()[k]);
    CHECK(sample_sd(diffs) == doctest::Approx(50.0).epsilon(0.03));
}

TEST_CASE("fading trace must cover the stream") {
    const TimeTagStream in(Channel("x"), {0, 1000}, Span{0, 2'000'000'000'000});
    ChannelModel ch;
    FadingModel f;
    f.scintillation_index = 0.5;
    const FadingTrace short_trace = make_fading_trace(
        f, Span{0, 1'000'000'000'000}, 41);
    CHECK_THROWS_AS(propagate(in, ch, &short_trace, 42), std::invalid_argument);
}

TEST_CASE("clock phase deterministic parts are exact") {
    ClockModel clk;
    clk.offset_ps = 100.0;
    auto x = synthesize_clock_phase(clk, 100, 1.0, 1);
    for (double v : x) CHECK(v == doctest::Approx(100e-12).epsilon(1e-12));

    clk.offset_ps = 0.0;
    clk.fractional_frequency_offset = 1e-9;
    x = synthesize_clock_phase(clk, 1001, 1.0, 1);
    CHECK(x[1000] == doctest::Approx(1e-6).epsilon(1e-12));
}

TEST_CASE("white phase noise level sets the sample deviation") {
    ClockModel clk;
    clk.noise.push_back({ClockNoiseKind::white_pm, 5.0});  // ps per sample
    const auto x = synthesize_clock_phase(clk, 100000, 1.0, 12);
    CHECK(sample_sd(x) == doctest::Approx(5e-12).epsilon(0.02));
}

TEST_CASE("white frequency noise walks with the configured Allan level") {
    ClockModel clk;
    clk.noise.push_back({ClockNoiseKind::white_fm, 1e-12});
    const auto x = synthesize_clock_phase(clk, 50000, 1.0, 13);
    PhaseSeries p{x, 1.0, {}};
    CHECK(adev(p, 1) == doctest::Approx(1e-12).epsilon(0.05));
    CHECK(mdev(p, 8) / adev(p, 8) ==
          doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(0.08));
    const auto curve = stability_curve(p, octave_m_grid(p.size()));
    CHECK(loglog_slope(curve, DevKind::adev, 1.0, 64.0) ==
          doctest::Approx(-0.5).epsilon(0.2));
}

TEST_CASE("negative noise level is rejected") {
    ClockModel clk;
    clk.noise.push_back({ClockNoiseKind::white_pm, -1.0});
    CHECK_THROWS_AS(synthesize_clock_phase(clk, 10, 1.0, 1),
                    std::invalid_argument);
}

TEST_CASE("detector identity and dead-time rule") {
    const TimeTagStream in(Channel::d1(), {100, 110, 90000}, Span{0, 1'000'000});
    ClockModel zero;
    const ClockPhase phase = make_clock_phase(zero, in.span(), 1e-3, 1);
    DetectorModel det;  // efficiency 1, no noise
    const auto same = timestamp(in, det, phase, 2);
    CHECK(same.tags() == in.tags());

    det.dead_time_ps = 50000;
    const auto gated = timestamp(in, det, phase, 2);
    CHECK(gated.tags() == std::vector<std::int64_t>{100, 90000});
}

TEST_CASE("dark counts arrive at the configured rate") {
    const TimeTagStream in(Channel::d1(), {}, Span{0, 10'000'000'000'000});
    ClockModel zero;
    const ClockPhase phase = make_clock_phase(zero, in.span(), 1e-3, 1);
    DetectorModel det;
    det.efficiency = 0.0;
    det.dark_rate_hz = 100.0;
    const auto out = timestamp(in, det, phase, 5);
    CHECK(std::fabs(static_cast<double>(out.size()) - 1000.0) < 160.0);
}

TEST_CASE("constant clock offset shifts timestamps exactly") {
    const TimeTagStream in(Channel::d1(), {1000, 2000, 3000}, Span{0, 1'000'000});
    ClockModel clk;
    clk.offset_ps = 250.0;
    const ClockPhase phase = make_clock_phase(clk, in.span(), 1e-3, 1);
    DetectorModel det;
    const auto out = timestamp(in, det, phase, 2);
    CHECK(out.tags() == std::vector<std::int64_t>{1250, 2250, 3250});
}

TEST_CASE("noiseless symmetric scenario recovers a zero offset exactly") {
    auto cfg = clean_scenario();
    // Rate low enough that no accidental (cross-pair) coincidence lands in
    // any window, so every histogram is a single clean bin.
    cfg.source.pair_rate_hz = 2e3;
    const auto res = simulate_scenario(cfg);
    const auto series = analyze_series(res.streams, 1.0, CoincidenceParams{});
    CHECK(series.gap_indices.empty());
    REQUIRE(!series.results.empty());
    for (const auto& w : series.results) CHECK(w.t0_ps == 0.0);
    for (double t : res.truth.true_t0_ps) CHECK(t == 0.0);
}

TEST_CASE("route asymmetry appears as a constant offset with known sign") {
    auto cfg = clean_scenario();
    cfg.fiber_return.base_delay_ps = 1'200'000;  // route A slower by 200 ns
    const auto res = simulate_scenario(cfg);
    const auto series = analyze_series(res.streams, 1.0, CoincidenceParams{});
    REQUIRE(!series.results.empty());
    for (const auto& w : series.results)
        CHECK(w.t0_ps == doctest::Approx(-100000.0));  // (dB - dA) / 2
    CHECK(res.truth.route_asymmetry_ps == doctest::Approx(-100000.0));
    for (double t : res.truth.true_t0_ps)
        CHECK(t == doctest::Approx(-100000.0));
}

TEST_CASE("deep-loss budget yields the expected route imbalance") {
    auto cfg = clean_scenario();
    cfg.source.pair_rate_hz = 2e6;
    cfg.run.duration_s = 1.0;
    cfg.fs_uplink.mean_loss_db = 23.0;
    cfg.fiber_return.mean_loss_db = 2.5;
    cfg.fiber_out.mean_loss_db = 2.5;
    cfg.fs_downlink.mean_loss_db = 27.0;
    const auto res = simulate_scenario(cfg);
    const double n1 = static_cast<double>(res.streams[0].size());
    const double n2 = static_cast<double>(res.streams[1].size());
    // Survival ratio 10^((29.5 - 25.5) / 10).
    CHECK(n1 / n2 == doctest::Approx(std::pow(10.0, 0.4)).epsilon(0.2));
    CHECK(n1 == doctest::Approx(1e6 * std::pow(10.0, -2.55)).epsilon(0.15));
}

TEST_CASE("idler attenuation throttles the herald rate") {
    auto cfg = clean_scenario();
    cfg.source.pair_rate_hz = 1.5e7;
    cfg.run.duration_s = 0.2;
    cfg.idler_attenuation_db = 13.0;
    cfg.detectors[2].efficiency = 0.85;
    cfg.detectors[3].efficiency = 0.85;
    const auto res = simulate_scenario(cfg);
    const double r3 = res.streams[2].rate_hz();
    // Half the idlers, 13 dB attenuation, 85 % efficiency.
    const double expect = 0.5 * 1.5e7 * std::pow(10.0, -1.3) * 0.85;
    CHECK(r3 == doctest::Approx(expect).epsilon(0.05));
}

TEST_CASE("two independent clocks surface as the recovered offset") {
    auto cfg = clean_scenario();
    cfg.source.correlation_sigma_ps = 30.0;
    cfg.clocks.mode = ClockTopology::two_clock;
    cfg.clocks.local.offset_ps = 100.0;
    ClockModel remote;
    remote.offset_ps = 40.0;
    cfg.clocks.remote = remote;
    const auto res = simulate_scenario(cfg);
    const auto series = analyze_series(res.streams, 1.0, CoincidenceParams{});
    REQUIRE(!series.results.empty());
    for (const auto& w : series.results)
        CHECK(w.t0_ps == doctest::Approx(60.0).epsilon(0.02));
    for (double t : res.truth.true_t0_ps) CHECK(t == doctest::Approx(60.0));
}

TEST_CASE("scenario synthesis is deterministic per seed") {
    auto cfg = clean_scenario();
    cfg.source.correlation_sigma_ps = 30.0;
    cfg.run.duration_s = 1.0;
    const auto a = simulate_scenario(cfg);
    const auto b = simulate_scenario(cfg);
    for (int k = 0; k < 4; ++k) {
        CHECK(a.streams[static_cast<std::size_t>(k)].tags() ==
              b.streams[static_cast<std::size_t>(k)].tags());
    }
    cfg.run.seed = 8;
    const auto c = simulate_scenario(cfg);
    CHECK(a.streams[0].tags() != c.streams[0].tags());
}
