#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "qtwtt/coincidence.hpp"
#include "qtwtt/spectral.hpp"
#include "qtwtt/stability.hpp"
#include "qtwtt/twtt.hpp"

namespace qtwtt {

// A spectrum or histogram bundled with the basename used for its CSV file.
struct NamedSpectrum {
    std::string name;
    Spectrum spectrum;
};

struct NamedHistogram {
    std::string name;
    CoincidenceHistogram histogram;
};

// Provenance fields recorded verbatim in report.json.
struct ReportMeta {
    std::string config_digest;              // hex digest of the scenario text, "" if none
    std::optional<std::uint64_t> seed;      // run seed when known
    std::string tool_version = "qtwtt 1.0.0";
    // Sign/route convention string so downstream consumers need not guess.
    std::string route_convention =
        "t0 = (down_delay - up_delay) / 2; positive t0 means the remote clock "
        "reads behind the local clock";
    // Optional pointer to a reference stability curve shipped alongside the
    // report (e.g. a modeled space-clock TDEV table for overlay plots).
    std::string overlay_note;
};

// Summary numbers; each is recomputed from exactly the rows written to the
// CSV artifacts so the report never disagrees with its own files.
struct RunReport {
    std::size_t window_count = 0;           // valid windows (rows in series.csv)
    std::size_t gap_count = 0;
    std::vector<std::size_t> gap_indices;
    double empirical_sd_t0_ps = 0.0;        // sample SD over valid windows
    double mean_sd_eq2_ps = 0.0;
    double mean_sd_eq3_ps = 0.0;
    std::optional<double> mean_true_t0_ps;  // when the series carries truth
    std::filesystem::path report_path;      // report.json
    std::filesystem::path series_path;      // series.csv
    std::filesystem::path stability_path;   // stability.csv
};

// Writes report.json, series.csv, t0_trace.csv, stability.csv, plus one
// hist_<name>.csv per histogram and one psd_<name>.csv per spectrum.
// Throws std::invalid_argument on an empty series and std::runtime_error on
// I/O failure. The output directory is created if absent.
RunReport emit_report(const TwttSeries& series,
                      const StabilitySeries& stability,
                      const std::vector<NamedSpectrum>& spectra,
                      const std::vector<NamedHistogram>& histograms,
                      const ReportMeta& meta,
                      const std::filesystem::path& outdir);

// series.csv / stability.csv writers shared by emit_report and the CLI.
void write_series_csv(const TwttSeries& series, const std::filesystem::path& path);
void write_stability_csv(const StabilitySeries& st, const std::filesystem::path& path);
void write_histogram_csv(const CoincidenceHistogram& h, const std::filesystem::path& path);
void write_spectrum_csv(const Spectrum& sp, const std::filesystem::path& path);

}  // namespace qtwtt
