// Command-line front end: simulate scenarios, histogram coincidences,
// recover clock offsets, and compute stability/spectral summaries.
//
// Subcommands: simulate, coincidence, twtt, stability, psd, report.
// All failures exit nonzero after printing a single "error: ..." line.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "qtwtt/coincidence.hpp"
#include "qtwtt/report.hpp"
#include "qtwtt/scenario_json.hpp"
#include "qtwtt/sim.hpp"
#include "qtwtt/spectral.hpp"
#include "qtwtt/stability.hpp"
#include "qtwtt/tag_io.hpp"
#include "qtwtt/tagstream.hpp"
#include "qtwtt/twtt.hpp"

namespace {

using namespace qtwtt;

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6g", v);
    return buf;
}

// "file.qtts:D1" -> path + channel selector.  A selector is the suffix
// after the last ':' provided it contains no path separator or dot.
struct Selection {
    std::filesystem::path path;
    std::optional<std::string> channel;
};

Selection parse_selection(const std::string& arg) {
    const auto pos = arg.rfind(':');
    if (pos != std::string::npos && pos > 0 && pos + 1 < arg.size()) {
        const std::string suffix = arg.substr(pos + 1);
        if (suffix.find('/') == std::string::npos &&
            suffix.find('\\') == std::string::npos &&
            suffix.find('.') == std::string::npos)
            return {arg.substr(0, pos), suffix};
    }
    return {arg, std::nullopt};
}

const TimeTagStream& pick(const std::map<std::string, TimeTagStream>& streams,
                          const std::string& label) {
    const auto it = streams.find(label);
    if (it == streams.end()) {
        std::string have;
        for (const auto& [k, v] : streams) {
            if (!have.empty()) have += ", ";
            have += k;
        }
        throw std::runtime_error("channel '" + label + "' not in file (have: " +
                                 (have.empty() ? "none" : have) + ")");
    }
    return it->second;
}

std::array<TimeTagStream, 4> pick_quad(
    const std::map<std::string, TimeTagStream>& streams) {
    std::array<TimeTagStream, 4> out;
    for (int i = 0; i < 4; ++i)
        out[static_cast<std::size_t>(i)] =
            pick(streams, Channel::from_standard_index(i).label());
    return out;
}

std::pair<std::string, std::string> parse_channel_pair(const std::string& arg) {
    const auto pos = arg.find(':');
    if (pos == std::string::npos || pos == 0 || pos + 1 >= arg.size())
        throw std::runtime_error("--channel expects the form A:B, got '" + arg +
                                 "'");
    return {arg.substr(0, pos), arg.substr(pos + 1)};
}

// Ground truth sampled at each analysis window midpoint, for reports.
std::vector<double> truth_per_window(const SimTruth& truth,
                                     const TwttSeries& series) {
    std::vector<double> out;
    if (truth.t_s.empty() || truth.dt_s <= 0.0) return out;
    const auto nwin = static_cast<std::size_t>(std::max(series.total_windows, 0));
    out.reserve(nwin);
    for (std::size_t k = 0; k < nwin; ++k) {
        const double t_mid =
            static_cast<double>(series.start_ps) / kPsPerS +
            (static_cast<double>(k) + 0.5) * series.window_s;
        const double pos = (t_mid - truth.t_s.front()) / truth.dt_s;
        const auto idx = static_cast<std::size_t>(std::clamp(
            std::llround(pos), 0LL,
            static_cast<long long>(truth.true_t0_ps.size()) - 1));
        out.push_back(truth.true_t0_ps[idx]);
    }
    return out;
}

void write_truth_csv(const SimTruth& truth, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
    out << "t_s,true_t0_ps,delay_a_ps,delay_b_ps\n";
    for (std::size_t i = 0; i < truth.t_s.size(); ++i) {
        char buf[160];
        std::snprintf(buf, sizeof(buf), "%.10g,%.10g,%.10g,%.10g\n",
                      truth.t_s[i], truth.true_t0_ps[i], truth.delay_a_ps[i],
                      truth.delay_b_ps[i]);
        out << buf;
    }
    if (!out.flush()) throw std::runtime_error("write failed: " + path.string());
}

StabilitySeries stability_of(const TwttSeries& series) {
    const PhaseSeries phase = to_phase_series(series);
    const auto grid = octave_m_grid(phase.size());
    if (grid.empty()) return {};
    return stability_curve(phase, grid);
}

// ---- simulate -------------------------------------------------------------

struct SimulateOpts {
    std::string config;
    std::string output;
    std::string truth_output;
    std::optional<std::uint64_t> seed;
};

int run_simulate(const SimulateOpts& o) {
    ScenarioConfig cfg = load_scenario(o.config);
    if (o.seed) cfg.run.seed = *o.seed;
    const SimResult res = simulate_scenario(cfg);
    write_tags({res.streams.begin(), res.streams.end()}, o.output);
    if (!o.truth_output.empty()) write_truth_csv(res.truth, o.truth_output);
    for (const auto& s : res.streams)
        std::cout << s.channel().label() << ": " << s.size() << " tags ("
                  << fmt(s.rate_hz()) << " Hz)\n";
    std::cout << "wrote " << o.output << "\n";
    return 0;
}

// ---- coincidence ----------------------------------------------------------

struct CoincidenceOpts {
    std::vector<std::string> inputs;
    std::string output;
    std::string channel_pair = "D3:D1";
    std::int64_t window_ps = 2000;
    std::int64_t bin_ps = 10;
    std::optional<std::int64_t> guess_ps;
};

int run_coincidence(const CoincidenceOpts& o) {
    if (o.inputs.empty() || o.inputs.size() > 2)
        throw std::runtime_error("coincidence needs one or two --input files");
    TimeTagStream a, b;
    if (o.inputs.size() == 2) {
        const Selection sa = parse_selection(o.inputs[0]);
        const Selection sb = parse_selection(o.inputs[1]);
        const auto ma = read_tags(sa.path);
        const auto mb = read_tags(sb.path);
        a = sa.channel ? pick(ma, *sa.channel)
                       : (ma.size() == 1 ? ma.begin()->second
                                         : pick(ma, "D3"));
        b = sb.channel ? pick(mb, *sb.channel)
                       : (mb.size() == 1 ? mb.begin()->second
                                         : pick(mb, "D1"));
    } else {
        const Selection s = parse_selection(o.inputs[0]);
        const auto m = read_tags(s.path);
        const auto [la, lb] = parse_channel_pair(o.channel_pair);
        a = pick(m, la);
        b = pick(m, lb);
    }
    const std::int64_t guess =
        o.guess_ps ? *o.guess_ps
                   : find_delay_ps(a, b, CoincidenceParams{}.search_halfwidth_ps,
                                   CoincidenceParams{}.coarse_bin_ps);
    const CoincidenceHistogram h =
        cross_correlate(a, b, o.window_ps, o.bin_ps, guess);
    std::cout << a.channel().label() << " x " << b.channel().label() << ": "
              << h.total() << " delays in " << h.size() << " bins around "
              << guess << " ps\n";
    try {
        const PeakFit fit = fit_peak(h);
        std::cout << "peak: center " << fmt(fit.center_ps) << " ps, sigma "
                  << fmt(fit.sigma_ps) << " ps, fwhm " << fmt(fit.fwhm_ps)
                  << " ps, pairs " << fmt(fit.pair_count) << ", CAR "
                  << fmt(fit.car) << "\n";
    } catch (const NoPeakError& e) {
        std::cout << "no significant peak (" << e.what() << ")\n";
    } catch (const NonConvergenceError& e) {
        std::cout << "fit did not converge (" << e.what() << ")\n";
    }
    if (!o.output.empty()) {
        write_histogram_csv(h, o.output);
        std::cout << "wrote " << o.output << "\n";
    }
    return 0;
}

// ---- twtt -----------------------------------------------------------------

struct TwttOpts {
    std::string input;
    std::string output = "series.csv";
    double window_s = 50.0;
    std::int64_t window_ps = 2000;
    std::int64_t bin_ps = 10;
};

TwttSeries analyze_file(const TwttOpts& o) {
    const Selection s = parse_selection(o.input);
    const auto m = read_tags(s.path);
    CoincidenceParams params;
    params.window_ps = o.window_ps;
    params.bin_width_ps = o.bin_ps;
    return analyze_series(pick_quad(m), o.window_s, params);
}

void print_series_summary(const TwttSeries& series) {
    std::vector<double> t0;
    for (const auto& r : series.results) t0.push_back(r.t0_ps);
    double mean = 0.0;
    for (double v : t0) mean += v;
    if (!t0.empty()) mean /= static_cast<double>(t0.size());
    double ss = 0.0;
    for (double v : t0) ss += (v - mean) * (v - mean);
    const double sd =
        t0.size() > 1 ? std::sqrt(ss / static_cast<double>(t0.size() - 1)) : 0.0;
    std::cout << "windows: " << series.total_windows << " total, "
              << series.results.size() << " valid, " << series.gap_indices.size()
              << " gaps\n";
    std::cout << "t0: mean " << fmt(mean) << " ps, sd " << fmt(sd) << " ps\n";
}

int run_twtt(const TwttOpts& o) {
    const TwttSeries series = analyze_file(o);
    print_series_summary(series);
    write_series_csv(series, o.output);
    std::cout << "wrote " << o.output << "\n";
    return 0;
}

// ---- stability ------------------------------------------------------------

struct StabilityOpts {
    std::string input;
    std::string output;
    std::optional<double> tau0_s;
};

PhaseSeries phase_from_series_csv(const std::filesystem::path& path,
                                  std::optional<double> tau0_override) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open: " + path.string());
    std::string line;
    if (!std::getline(in, line))
        throw std::runtime_error("empty file: " + path.string());
    std::vector<std::string> cols;
    {
        std::stringstream ss(line);
        std::string c;
        while (std::getline(ss, c, ',')) cols.push_back(c);
    }
    const auto find_col = [&](const std::string& name) {
        const auto it = std::find(cols.begin(), cols.end(), name);
        if (it == cols.end())
            throw std::runtime_error("column '" + name + "' missing in " +
                                     path.string());
        return static_cast<std::size_t>(it - cols.begin());
    };
    const std::size_t c_start = find_col("window_start_s");
    const std::size_t c_t0 = find_col("t0_ps");

    std::vector<double> ts, vals;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string cell;
        std::vector<std::string> row;
        while (std::getline(ss, cell, ',')) row.push_back(cell);
        if (row.size() < cols.size())
            throw std::runtime_error(path.string() + ":" +
                                     std::to_string(lineno) + ": short row");
        try {
            ts.push_back(std::stod(row[c_start]));
            vals.push_back(std::stod(row[c_t0]));
        } catch (const std::exception&) {
            throw std::runtime_error(path.string() + ":" +
                                     std::to_string(lineno) +
                                     ": unparsable number");
        }
    }
    if (ts.size() < 2)
        throw std::runtime_error("need at least two rows in " + path.string());

    double tau0 = tau0_override.value_or(0.0);
    if (tau0 <= 0.0) {
        tau0 = std::numeric_limits<double>::infinity();
        for (std::size_t i = 1; i < ts.size(); ++i)
            if (ts[i] - ts[i - 1] > 0.0) tau0 = std::min(tau0, ts[i] - ts[i - 1]);
        if (!std::isfinite(tau0))
            throw std::runtime_error("window start times are not increasing");
    }

    const auto n = static_cast<std::size_t>(
        std::llround((ts.back() - ts.front()) / tau0)) + 1;
    PhaseSeries p;
    p.tau0_s = tau0;
    p.x_s.assign(n, 0.0);
    p.valid.assign(n, false);
    for (std::size_t i = 0; i < ts.size(); ++i) {
        const auto k = static_cast<std::size_t>(
            std::llround((ts[i] - ts.front()) / tau0));
        if (k >= n) continue;
        p.x_s[k] = vals[i] / kPsPerS;
        p.valid[k] = true;
    }
    return p;
}

int run_stability(const StabilityOpts& o) {
    const PhaseSeries phase = phase_from_series_csv(o.input, o.tau0_s);
    const auto grid = octave_m_grid(phase.size());
    if (grid.empty())
        throw std::runtime_error("series too short for stability analysis");
    const StabilitySeries st = stability_curve(phase, grid);
    std::cout << "tau_s adev mdev tdev n_terms\n";
    for (std::size_t i = 0; i < st.size(); ++i)
        std::cout << fmt(st.taus_s[i]) << ' ' << fmt(st.adev[i]) << ' '
                  << fmt(st.mdev[i]) << ' ' << fmt(st.tdev[i]) << ' '
                  << st.n_terms[i] << "\n";
    if (!o.output.empty()) {
        write_stability_csv(st, o.output);
        std::cout << "wrote " << o.output << "\n";
    }
    return 0;
}

// ---- psd ------------------------------------------------------------------

struct PsdOpts {
    std::string input;
    std::string output;
    double dt_s = 1e-3;
    double fit_max_hz = 20.0;
};

int run_psd(const PsdOpts& o) {
    const Selection s = parse_selection(o.input);
    const auto m = read_tags(s.path);
    const TimeTagStream& stream =
        s.channel ? pick(m, *s.channel)
                  : (m.size() == 1 ? m.begin()->second : pick(m, "D1"));
    const RateTrace trace = countrate_trace(stream, o.dt_s);
    const Spectrum sp = psd(trace);
    std::cout << stream.channel().label() << ": " << trace.size()
              << " samples at dt " << fmt(o.dt_s) << " s, mean "
              << fmt(trace.mean() / o.dt_s) << " Hz\n";
    try {
        const auto fit = powerlaw_fit(
            sp, sp.freqs_hz.front(),
            std::min(o.fit_max_hz, sp.freqs_hz.back()));
        std::cout << "power-law slope below " << fmt(o.fit_max_hz)
                  << " Hz: " << fmt(fit.first) << "\n";
    } catch (const std::invalid_argument&) {
        std::cout << "power-law slope: not enough bins to fit\n";
    }
    if (!o.output.empty()) {
        write_spectrum_csv(sp, o.output);
        std::cout << "wrote " << o.output << "\n";
    }
    return 0;
}

// ---- report ---------------------------------------------------------------

struct ReportOpts {
    std::string config;
    std::string input;
    std::string outdir = "report";
    std::optional<std::uint64_t> seed;
    std::optional<double> window_s;
    std::optional<std::int64_t> window_ps;
    std::optional<std::int64_t> bin_ps;
};

int run_report(const ReportOpts& o) {
    if (o.config.empty() == o.input.empty())
        throw std::runtime_error(
            "report needs exactly one of --config (simulate) or --input "
            "(recorded tags)");

    std::array<TimeTagStream, 4> streams;
    ReportMeta meta;
    meta.overlay_note =
        "data/space_clock_tdev.csv holds a modeled reference-clock TDEV curve "
        "for overlay plots";
    std::optional<SimTruth> truth;
    double window_s = o.window_s.value_or(50.0);
    CoincidenceParams params;
    if (o.window_ps) params.window_ps = *o.window_ps;
    if (o.bin_ps) params.bin_width_ps = *o.bin_ps;

    if (!o.config.empty()) {
        std::ifstream in(o.config);
        if (!in) throw std::runtime_error("cannot open: " + o.config);
        std::stringstream buf;
        buf << in.rdbuf();
        ScenarioConfig cfg = parse_scenario(buf.str());
        if (o.seed) cfg.run.seed = *o.seed;
        meta.config_digest = text_digest(buf.str());
        meta.seed = cfg.run.seed;
        if (!o.window_s) window_s = cfg.run.window_s;
        if (!o.window_ps) params.window_ps = cfg.coincidence.window_ps;
        if (!o.bin_ps) params.bin_width_ps = cfg.coincidence.bin_width_ps;
        SimResult res = simulate_scenario(cfg);
        streams = std::move(res.streams);
        truth = std::move(res.truth);
    } else {
        const Selection s = parse_selection(o.input);
        streams = pick_quad(read_tags(s.path));
    }

    TwttSeries series = analyze_series(streams, window_s, params);
    if (truth) series.truth_t0_ps = truth_per_window(*truth, series);

    const StabilitySeries st = stability_of(series);

    std::vector<NamedSpectrum> spectra;
    for (const auto& s : streams) {
        if (s.size() < 16) continue;
        try {
            spectra.push_back(
                {s.channel().label(), psd(countrate_trace(s, 1e-3))});
        } catch (const std::invalid_argument&) {
        }
    }

    std::vector<NamedHistogram> hists;
    try {
        const std::int64_t gu = find_delay_ps(
            streams[2], streams[0], params.search_halfwidth_ps, params.coarse_bin_ps);
        const std::int64_t gd = find_delay_ps(
            streams[3], streams[1], params.search_halfwidth_ps, params.coarse_bin_ps);
        hists.push_back({"up", cross_correlate(streams[2], streams[0],
                                               params.window_ps,
                                               params.bin_width_ps, gu)});
        hists.push_back({"down", cross_correlate(streams[3], streams[1],
                                                 params.window_ps,
                                                 params.bin_width_ps, gd)});
    } catch (const NoPeakError&) {
    }

    const RunReport rep =
        emit_report(series, st, spectra, hists, meta, o.outdir);
    print_series_summary(series);
    std::cout << "report: " << rep.report_path.string() << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{
        "qtwtt: two-way time transfer with correlated photon pairs - "
        "simulation and analysis"};
    app.require_subcommand(1);

    SimulateOpts sim_o;
    auto* sim = app.add_subcommand(
        "simulate", "Synthesize detector tag streams from a scenario file");
    sim->add_option("-c,--config", sim_o.config, "Scenario JSON file")
        ->required();
    sim->add_option("-o,--output", sim_o.output,
                    "Tag file to write (.qtts binary or .csv)")
        ->required();
    sim->add_option("--truth", sim_o.truth_output,
                    "Also write the ground-truth trace CSV here");
    std::uint64_t sim_seed = 0;
    auto* sim_seed_opt =
        sim->add_option("--seed", sim_seed, "Override the scenario seed");

    CoincidenceOpts co_o;
    auto* co = app.add_subcommand(
        "coincidence", "Histogram pairwise delays between two channels");
    co->add_option("-i,--input", co_o.inputs,
                   "Tag file(s); channel selectable as file.qtts:D1")
        ->required();
    co->add_option("-o,--output", co_o.output, "Histogram CSV to write");
    co->add_option("--channel", co_o.channel_pair,
                   "Channel pair A:B (delays are t_B - t_A)");
    co->add_option("--window-ps", co_o.window_ps, "Half-width of the delay window");
    co->add_option("--bin-ps", co_o.bin_ps, "Histogram bin width");
    std::int64_t co_guess = 0;
    auto* co_guess_opt = co->add_option(
        "--guess-ps", co_guess, "Delay guess (default: coarse search)");

    TwttOpts tw_o;
    auto* tw = app.add_subcommand(
        "twtt", "Recover the clock offset series from a D1..D4 tag file");
    tw->add_option("-i,--input", tw_o.input, "Tag file with channels D1..D4")
        ->required();
    tw->add_option("-o,--output", tw_o.output, "Series CSV to write");
    tw->add_option("--window-s", tw_o.window_s, "Analysis window length");
    tw->add_option("--window-ps", tw_o.window_ps, "Coincidence window half-width");
    tw->add_option("--bin-ps", tw_o.bin_ps, "Coincidence bin width");

    StabilityOpts st_o;
    auto* st = app.add_subcommand(
        "stability", "ADEV/MDEV/TDEV table from a recovered offset series");
    st->add_option("-i,--input", st_o.input, "series.csv from the twtt command")
        ->required();
    st->add_option("-o,--output", st_o.output, "Stability CSV to write");
    double st_tau0 = 0.0;
    auto* st_tau0_opt = st->add_option(
        "--tau0-s", st_tau0, "Sample spacing (default: inferred from the series)");

    PsdOpts ps_o;
    auto* ps = app.add_subcommand(
        "psd", "Power spectral density of a channel's count-rate trace");
    ps->add_option("-i,--input", ps_o.input,
                   "Tag file; channel selectable as file.qtts:D2")
        ->required();
    ps->add_option("-o,--output", ps_o.output, "Spectrum CSV to write");
    ps->add_option("--dt-s", ps_o.dt_s, "Counting interval (default 1 ms)");
    ps->add_option("--fit-max-hz", ps_o.fit_max_hz,
                   "Upper edge of the slope fit band");

    ReportOpts re_o;
    auto* re = app.add_subcommand(
        "report", "Full pipeline: simulate (or load), analyze, emit artifacts");
    re->add_option("-c,--config", re_o.config, "Scenario JSON file to simulate");
    re->add_option("-i,--input", re_o.input, "Recorded tag file with D1..D4");
    re->add_option("-o,--output", re_o.outdir, "Output directory");
    std::uint64_t re_seed = 0;
    auto* re_seed_opt =
        re->add_option("--seed", re_seed, "Override the scenario seed");
    double re_window_s = 0.0;
    auto* re_window_opt =
        re->add_option("--window-s", re_window_s, "Analysis window length");
    std::int64_t re_window_ps = 0, re_bin_ps = 0;
    auto* re_window_ps_opt = re->add_option("--window-ps", re_window_ps,
                                            "Coincidence window half-width");
    auto* re_bin_ps_opt =
        re->add_option("--bin-ps", re_bin_ps, "Coincidence bin width");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    try {
        if (*sim) {
            if (*sim_seed_opt) sim_o.seed = sim_seed;
            return run_simulate(sim_o);
        }
        if (*co) {
            if (*co_guess_opt) co_o.guess_ps = co_guess;
            return run_coincidence(co_o);
        }
        if (*tw) return run_twtt(tw_o);
        if (*st) {
            if (*st_tau0_opt) st_o.tau0_s = st_tau0;
            return run_stability(st_o);
        }
        if (*ps) return run_psd(ps_o);
        if (*re) {
            if (*re_seed_opt) re_o.seed = re_seed;
            if (*re_window_opt) re_o.window_s = re_window_s;
            if (*re_window_ps_opt) re_o.window_ps = re_window_ps;
            if (*re_bin_ps_opt) re_o.bin_ps = re_bin_ps;
            return run_report(re_o);
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    std::cerr << "error: no subcommand\n";
    return 1;
}
