#include "qtwtt/report.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <string>

#include "json.hpp"

namespace qtwtt {
namespace {

using ordered_json = nlohmann::ordered_json;

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.10g", v);
    return buf;
}

std::ofstream open_out(const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
    return out;
}

void finish(std::ofstream& out, const std::filesystem::path& path) {
    out.flush();
    if (!out) throw std::runtime_error("write failed: " + path.string());
}

// JSON has no infinity; CAR can legitimately be +inf on a clean histogram.
ordered_json json_number(double v) {
    if (std::isfinite(v)) return v;
    return nullptr;
}

double sample_sd(const std::vector<double>& v) {
    if (v.size() < 2) return 0.0;
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= static_cast<double>(v.size());
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

double mean_of(const std::vector<double>& v) {
    if (v.empty()) return 0.0;
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

}  // namespace

void write_series_csv(const TwttSeries& series, const std::filesystem::path& path) {
    auto out = open_out(path);
    out << "window_start_s,up_delay_ps,down_delay_ps,t0_ps,sd_eq2_ps,sd_eq3_ps,"
           "car_up,car_down,fwhm_up_ps,fwhm_down_ps\n";
    for (const auto& r : series.results) {
        out << fmt(static_cast<double>(r.window_start_ps) / kPsPerS) << ','
            << fmt(r.up_fit.center_ps) << ',' << fmt(r.down_fit.center_ps) << ','
            << fmt(r.t0_ps) << ',' << fmt(r.predicted_sd_eq2_ps) << ','
            << fmt(r.predicted_sd_eq3_ps) << ',' << fmt(r.up_fit.car) << ','
            << fmt(r.down_fit.car) << ',' << fmt(r.up_fit.fwhm_ps) << ','
            << fmt(r.down_fit.fwhm_ps) << '\n';
    }
    finish(out, path);
}

void write_stability_csv(const StabilitySeries& st, const std::filesystem::path& path) {
    auto out = open_out(path);
    out << "tau_s,adev,mdev,tdev,n_terms\n";
    for (std::size_t i = 0; i < st.size(); ++i) {
        out << fmt(st.taus_s[i]) << ',' << fmt(st.adev[i]) << ','
            << fmt(st.mdev[i]) << ',' << fmt(st.tdev[i]) << ','
            << st.n_terms[i] << '\n';
    }
    finish(out, path);
}

void write_histogram_csv(const CoincidenceHistogram& h, const std::filesystem::path& path) {
    auto out = open_out(path);
    out << "delay_ps,counts\n";
    for (std::size_t i = 0; i < h.size(); ++i)
        out << fmt(h.bin_center_ps(i)) << ',' << h.counts[i] << '\n';
    finish(out, path);
}

void write_spectrum_csv(const Spectrum& sp, const std::filesystem::path& path) {
    auto out = open_out(path);
    out << "freq_hz,power\n";
    for (std::size_t i = 0; i < sp.size(); ++i)
        out << fmt(sp.freqs_hz[i]) << ',' << fmt(sp.power[i]) << '\n';
    finish(out, path);
}

RunReport emit_report(const TwttSeries& series,
                      const StabilitySeries& stability,
                      const std::vector<NamedSpectrum>& spectra,
                      const std::vector<NamedHistogram>& histograms,
                      const ReportMeta& meta,
                      const std::filesystem::path& outdir) {
    if (series.total_windows <= 0)
        throw std::invalid_argument("emit_report: series has no windows");
    std::filesystem::create_directories(outdir);

    RunReport rep;
    rep.window_count = series.results.size();
    rep.gap_count = series.gap_indices.size();
    rep.gap_indices.assign(series.gap_indices.begin(), series.gap_indices.end());
    rep.series_path = outdir / "series.csv";
    rep.stability_path = outdir / "stability.csv";
    rep.report_path = outdir / "report.json";

    std::vector<double> t0, sd2, sd3;
    t0.reserve(series.results.size());
    for (const auto& r : series.results) {
        t0.push_back(r.t0_ps);
        sd2.push_back(r.predicted_sd_eq2_ps);
        sd3.push_back(r.predicted_sd_eq3_ps);
    }
    rep.empirical_sd_t0_ps = sample_sd(t0);
    rep.mean_sd_eq2_ps = mean_of(sd2);
    rep.mean_sd_eq3_ps = mean_of(sd3);

    write_series_csv(series, rep.series_path);
    write_stability_csv(stability, rep.stability_path);

    // Companion trace with the mean removed, for offset-fluctuation plots.
    {
        const double mean_t0 = mean_of(t0);
        auto out = open_out(outdir / "t0_trace.csv");
        out << "window_start_s,t0_ps,t0_minus_mean_ps\n";
        for (const auto& r : series.results)
            out << fmt(static_cast<double>(r.window_start_ps) / kPsPerS) << ','
                << fmt(r.t0_ps) << ',' << fmt(r.t0_ps - mean_t0) << '\n';
        finish(out, outdir / "t0_trace.csv");
    }

    ordered_json j;
    j["tool"] = {{"version", meta.tool_version}, {"tag_format_version", 1}};
    j["scenario"]["config_digest"] = meta.config_digest;
    if (meta.seed)
        j["scenario"]["seed"] = *meta.seed;
    else
        j["scenario"]["seed"] = nullptr;
    j["route_convention"] = meta.route_convention;

    ordered_json jw;
    jw["window_s"] = series.window_s;
    jw["total"] = series.total_windows;
    jw["valid"] = rep.window_count;
    jw["gaps"] = rep.gap_count;
    jw["gap_indices"] = rep.gap_indices;
    jw["empirical_sd_t0_ps"] = rep.empirical_sd_t0_ps;
    jw["mean_sd_eq2_ps"] = rep.mean_sd_eq2_ps;
    jw["mean_sd_eq3_ps"] = rep.mean_sd_eq3_ps;
    j["windows"] = jw;

    if (series.truth_t0_ps && !series.truth_t0_ps->empty()) {
        const auto& truth = *series.truth_t0_ps;
        std::vector<double> tvals, err;
        for (const auto& r : series.results) {
            const auto k = static_cast<std::size_t>(r.index);
            if (k < truth.size()) {
                tvals.push_back(truth[k]);
                err.push_back(r.t0_ps - truth[k]);
            }
        }
        rep.mean_true_t0_ps = mean_of(tvals);
        j["truth"] = {{"mean_true_t0_ps", *rep.mean_true_t0_ps},
                      {"mean_error_ps", mean_of(err)},
                      {"sd_error_ps", sample_sd(err)}};
    }

    ordered_json jst = ordered_json::array();
    for (std::size_t i = 0; i < stability.size(); ++i) {
        const DevConfidence ci = dev_confidence(stability.tdev[i], stability.n_terms[i]);
        jst.push_back({{"tau_s", stability.taus_s[i]},
                       {"adev", stability.adev[i]},
                       {"mdev", stability.mdev[i]},
                       {"tdev", stability.tdev[i]},
                       {"n_terms", stability.n_terms[i]},
                       {"tdev_ci68", {ci.lo, ci.hi}}});
    }
    j["stability"] = jst;

    ordered_json jsp = ordered_json::array();
    for (const auto& ns : spectra) {
        ordered_json e;
        e["name"] = ns.name;
        e["file"] = "psd_" + ns.name + ".csv";
        e["bins"] = ns.spectrum.size();
        if (ns.spectrum.size() > 0) {
            e["f_min_hz"] = ns.spectrum.freqs_hz.front();
            e["f_max_hz"] = ns.spectrum.freqs_hz.back();
            try {
                const auto fit = powerlaw_fit(ns.spectrum,
                                              ns.spectrum.freqs_hz.front(),
                                              ns.spectrum.freqs_hz.back());
                e["loglog_slope"] = json_number(fit.first);
            } catch (const std::invalid_argument&) {
                e["loglog_slope"] = nullptr;
            }
        }
        jsp.push_back(e);
        write_spectrum_csv(ns.spectrum, outdir / ("psd_" + ns.name + ".csv"));
    }
    j["spectra"] = jsp;

    ordered_json jh = ordered_json::array();
    for (const auto& nh : histograms) {
        jh.push_back({{"name", nh.name},
                      {"file", "hist_" + nh.name + ".csv"},
                      {"bins", nh.histogram.size()},
                      {"total_counts", nh.histogram.total()},
                      {"integration_s", nh.histogram.integration_s}});
        write_histogram_csv(nh.histogram, outdir / ("hist_" + nh.name + ".csv"));
    }
    j["histograms"] = jh;

    if (!meta.overlay_note.empty()) j["overlay_note"] = meta.overlay_note;
    j["files"] = {{"series", "series.csv"},
                  {"t0_trace", "t0_trace.csv"},
                  {"stability", "stability.csv"}};

    auto out = open_out(rep.report_path);
    out << j.dump(2) << '\n';
    finish(out, rep.report_path);
    return rep;
}

}  // namespace qtwtt
