#include "qtwtt/scenario_json.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

namespace qtwtt {

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& where, const std::string& what) {
    throw std::invalid_argument("scenario: " + where + ": " + what);
}

void require_keys(const json& j, const std::string& where,
                  const std::set<std::string>& required,
                  const std::set<std::string>& optional = {}) {
    if (!j.is_object()) fail(where, "expected an object");
    for (const auto& [key, _] : j.items()) {
        if (!required.count(key) && !optional.count(key))
            fail(where, "unknown key '" + key + "'");
    }
    for (const auto& key : required) {
        if (!j.contains(key)) fail(where, "missing key '" + key + "'");
    }
}

double get_num(const json& j, const std::string& where, const std::string& key) {
    const auto& v = j.at(key);
    if (!v.is_number()) fail(where, "'" + key + "' must be a number");
    return v.get<double>();
}

double get_num_or(const json& j, const std::string& where,
                  const std::string& key, double fallback) {
    if (!j.contains(key)) return fallback;
    return get_num(j, where, key);
}

DriftSpec parse_drift(const json& j, const std::string& where) {
    require_keys(j, where, {"shape"},
                 {"amplitude_ps", "period_s", "table"});
    DriftSpec d;
    const std::string shape = j.at("shape").get<std::string>();
    if (shape == "sinusoid" || shape == "linear_ramp") {
        d.shape = shape == "sinusoid" ? DriftShape::sinusoid
                                      : DriftShape::linear_ramp;
        if (!j.contains("amplitude_ps") || !j.contains("period_s"))
            fail(where, shape + " drift needs amplitude_ps and period_s");
        d.amplitude_ps = get_num(j, where, "amplitude_ps");
        d.period_s = get_num(j, where, "period_s");
        if (!(d.period_s > 0.0)) fail(where, "period_s must be positive");
    } else if (shape == "piecewise_table") {
        d.shape = DriftShape::piecewise_table;
        if (!j.contains("table")) fail(where, "piecewise_table needs 'table'");
        const auto& tab = j.at("table");
        if (!tab.is_array() || tab.size() < 2)
            fail(where, "'table' must list at least two [t_s, delay_ps] pairs");
        double prev_t = -std::numeric_limits<double>::infinity();
        for (const auto& row : tab) {
            if (!row.is_array() || row.size() != 2)
                fail(where, "'table' rows must be [t_s, delay_ps]");
            const double t = row[0].get<double>();
            const double v = row[1].get<double>();
            if (!(t > prev_t)) fail(where, "'table' times must be ascending");
            prev_t = t;
            d.table_s_ps.emplace_back(t, v);
        }
    } else {
        fail(where, "unknown drift shape '" + shape + "'");
    }
    return d;
}

FadingModel parse_fading(const json& j, const std::string& where) {
    require_keys(j, where, {"scintillation_index"},
                 {"exponent", "knee_hz", "zero_fade_fraction", "dt_s"});
    FadingModel f;
    f.scintillation_index = get_num(j, where, "scintillation_index");
    f.exponent = get_num_or(j, where, "exponent", f.exponent);
    f.knee_hz = get_num_or(j, where, "knee_hz", f.knee_hz);
    f.zero_fade_fraction =
        get_num_or(j, where, "zero_fade_fraction", f.zero_fade_fraction);
    f.dt_s = get_num_or(j, where, "dt_s", f.dt_s);
    if (!(f.scintillation_index >= 0.0))
        fail(where, "scintillation_index must be >= 0");
    if (!(f.zero_fade_fraction >= 0.0 && f.zero_fade_fraction < 1.0))
        fail(where, "zero_fade_fraction must be in [0, 1)");
    return f;
}

ChannelModel parse_segment(const json& j, const std::string& where) {
    require_keys(j, where, {"mean_loss_db", "base_delay_ps", "jitter_sigma_ps"},
                 {"drift", "fading"});
    ChannelModel c;
    c.mean_loss_db = get_num(j, where, "mean_loss_db");
    c.base_delay_ps = get_num(j, where, "base_delay_ps");
    c.jitter_sigma_ps = get_num(j, where, "jitter_sigma_ps");
    if (!(c.mean_loss_db >= 0.0)) fail(where, "mean_loss_db must be >= 0");
    if (!(c.jitter_sigma_ps >= 0.0)) fail(where, "jitter_sigma_ps must be >= 0");
    if (j.contains("drift")) c.drift = parse_drift(j.at("drift"), where + ".drift");
    if (j.contains("fading"))
        c.fading = parse_fading(j.at("fading"), where + ".fading");
    return c;
}

DetectorModel parse_detector(const json& j, const std::string& where) {
    require_keys(j, where,
                 {"efficiency", "jitter_sigma_ps", "dark_rate_hz", "dead_time_ps"});
    DetectorModel d;
    d.efficiency = get_num(j, where, "efficiency");
    d.jitter_sigma_ps = get_num(j, where, "jitter_sigma_ps");
    d.dark_rate_hz = get_num(j, where, "dark_rate_hz");
    const double dead = get_num(j, where, "dead_time_ps");
    if (!(d.efficiency >= 0.0 && d.efficiency <= 1.0))
        fail(where, "efficiency must be in [0, 1]");
    if (!(d.jitter_sigma_ps >= 0.0)) fail(where, "jitter_sigma_ps must be >= 0");
    if (!(d.dark_rate_hz >= 0.0)) fail(where, "dark_rate_hz must be >= 0");
    if (!(dead >= 0.0)) fail(where, "dead_time_ps must be >= 0");
    d.dead_time_ps = static_cast<std::int64_t>(std::llround(dead));
    return d;
}

ClockModel parse_clock(const json& j, const std::string& where) {
    require_keys(j, where, {},
                 {"offset_ps", "fractional_frequency_offset", "noise"});
    ClockModel c;
    c.offset_ps = get_num_or(j, where, "offset_ps", 0.0);
    c.fractional_frequency_offset =
        get_num_or(j, where, "fractional_frequency_offset", 0.0);
    if (j.contains("noise")) {
        const auto& arr = j.at("noise");
        if (!arr.is_array()) fail(where, "'noise' must be an array");
        for (const auto& term : arr) {
            require_keys(term, where + ".noise[]", {"kind", "level"});
            ClockNoiseTerm t;
            const std::string kind = term.at("kind").get<std::string>();
            if (kind == "white_pm") t.kind = ClockNoiseKind::white_pm;
            else if (kind == "flicker_pm") t.kind = ClockNoiseKind::flicker_pm;
            else if (kind == "white_fm") t.kind = ClockNoiseKind::white_fm;
            else fail(where, "unknown noise kind '" + kind + "'");
            t.level = get_num(term, where + ".noise[]", "level");
            if (!(t.level >= 0.0)) fail(where, "noise level must be >= 0");
            c.noise.push_back(t);
        }
    }
    return c;
}

}  // namespace

ScenarioConfig parse_scenario(const std::string& json_text) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw std::invalid_argument(std::string("scenario: bad JSON: ") +
                                    e.what());
    }
    require_keys(j, "top level", {"source", "segments", "detectors", "run"},
                 {"idler_attenuation_db", "clocks", "coincidence"});

    ScenarioConfig cfg;

    const auto& src = j.at("source");
    require_keys(src, "source", {"pair_rate_hz", "correlation_sigma_ps"});
    cfg.source.pair_rate_hz = get_num(src, "source", "pair_rate_hz");
    cfg.source.correlation_sigma_ps =
        get_num(src, "source", "correlation_sigma_ps");
    if (!(cfg.source.pair_rate_hz >= 0.0))
        fail("source", "pair_rate_hz must be >= 0");
    if (!(cfg.source.correlation_sigma_ps >= 0.0))
        fail("source", "correlation_sigma_ps must be >= 0");

    cfg.idler_attenuation_db =
        get_num_or(j, "top level", "idler_attenuation_db", 0.0);
    if (!(cfg.idler_attenuation_db >= 0.0))
        fail("top level", "idler_attenuation_db must be >= 0");

    const auto& segs = j.at("segments");
    require_keys(segs, "segments",
                 {"fs_uplink", "fiber_return", "fiber_out", "fs_downlink"});
    cfg.fs_uplink = parse_segment(segs.at("fs_uplink"), "segments.fs_uplink");
    cfg.fiber_return =
        parse_segment(segs.at("fiber_return"), "segments.fiber_return");
    cfg.fiber_out = parse_segment(segs.at("fiber_out"), "segments.fiber_out");
    cfg.fs_downlink =
        parse_segment(segs.at("fs_downlink"), "segments.fs_downlink");

    const auto& dets = j.at("detectors");
    require_keys(dets, "detectors", {"D1", "D2", "D3", "D4"});
    for (int i = 0; i < 4; ++i) {
        const std::string name = "D" + std::to_string(i + 1);
        cfg.detectors[static_cast<std::size_t>(i)] =
            parse_detector(dets.at(name), "detectors." + name);
    }

    if (j.contains("clocks")) {
        const auto& clk = j.at("clocks");
        require_keys(clk, "clocks", {}, {"mode", "local", "remote"});
        std::string mode = "loopback";
        if (clk.contains("mode")) mode = clk.at("mode").get<std::string>();
        if (mode == "loopback") cfg.clocks.mode = ClockTopology::loopback;
        else if (mode == "two_clock") cfg.clocks.mode = ClockTopology::two_clock;
        else fail("clocks", "unknown mode '" + mode + "'");
        if (clk.contains("local"))
            cfg.clocks.local = parse_clock(clk.at("local"), "clocks.local");
        if (clk.contains("remote"))
            cfg.clocks.remote = parse_clock(clk.at("remote"), "clocks.remote");
        if (cfg.clocks.mode == ClockTopology::two_clock && !cfg.clocks.remote)
            fail("clocks", "two_clock mode needs a 'remote' clock");
        if (cfg.clocks.mode == ClockTopology::loopback && cfg.clocks.remote)
            fail("clocks", "loopback mode must not define a 'remote' clock");
    }

    const auto& run = j.at("run");
    require_keys(run, "run", {"duration_s", "seed"}, {"window_s"});
    cfg.run.duration_s = get_num(run, "run", "duration_s");
    if (!(cfg.run.duration_s > 0.0)) fail("run", "duration_s must be positive");
    const auto& seed = run.at("seed");
    if (!seed.is_number_unsigned()) fail("run", "'seed' must be a nonnegative integer");
    cfg.run.seed = seed.get<std::uint64_t>();
    cfg.run.window_s = get_num_or(run, "run", "window_s", 50.0);
    if (!(cfg.run.window_s > 0.0)) fail("run", "window_s must be positive");
    if (cfg.run.window_s > cfg.run.duration_s)
        fail("run", "window_s must not exceed duration_s");

    if (j.contains("coincidence")) {
        const auto& co = j.at("coincidence");
        require_keys(co, "coincidence", {}, {"window_ps", "bin_width_ps"});
        cfg.coincidence.window_ps = static_cast<std::int64_t>(
            std::llround(get_num_or(co, "coincidence", "window_ps", 2000.0)));
        cfg.coincidence.bin_width_ps = static_cast<std::int64_t>(std::llround(
            get_num_or(co, "coincidence", "bin_width_ps", 10.0)));
        if (cfg.coincidence.bin_width_ps < 1)
            fail("coincidence", "bin_width_ps must be >= 1");
        if (cfg.coincidence.window_ps < cfg.coincidence.bin_width_ps)
            fail("coincidence", "window_ps must be >= bin_width_ps");
        if (cfg.coincidence.window_ps % cfg.coincidence.bin_width_ps != 0)
            fail("coincidence", "window_ps must be a multiple of bin_width_ps");
    }
    return cfg;
}

ScenarioConfig load_scenario(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in)
        throw std::invalid_argument("scenario: cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_scenario(ss.str());
}

std::string text_digest(const std::string& text) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx",
                  static_cast<unsigned long long>(h));
    return std::string(buf);
}

}  // namespace qtwtt
