#include "qtwtt/twtt.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <stdexcept>
#include <thread>

namespace qtwtt {

double recover_offset(double up_center_ps, double down_center_ps) {
    return 0.5 * (down_center_ps - up_center_ps);
}

double combine_sd(double sd_up_ps, double sd_down_ps) {
    if (!(sd_up_ps >= 0.0) || !(sd_down_ps >= 0.0))
        throw std::invalid_argument("combine_sd: deviations must be >= 0");
    return 0.5 * std::sqrt(sd_up_ps * sd_up_ps + sd_down_ps * sd_down_ps);
}

double predict_sd(double width_up_ps, double n_up, double width_down_ps,
                  double n_down) {
    if (!(n_up > 0.0) || !(n_down > 0.0))
        throw std::invalid_argument("predict_sd: pair counts must be positive");
    if (!(width_up_ps >= 0.0) || !(width_down_ps >= 0.0))
        throw std::invalid_argument("predict_sd: widths must be >= 0");
    const double su = width_up_ps / std::sqrt(2.0 * n_up);
    const double sd = width_down_ps / std::sqrt(2.0 * n_down);
    return combine_sd(su, sd);
}

namespace {

double derate(double n, double car) {
    if (std::isinf(car) && car > 0.0) return n;
    if (!(car > 0.0))
        throw std::invalid_argument("predict_sd_car: CAR must be positive");
    return n / (1.0 + 1.0 / car);
}

}  // namespace

double predict_sd_car(double width_up_ps, double n_up, double car_up,
                      double width_down_ps, double n_down, double car_down) {
    return predict_sd(width_up_ps, derate(n_up, car_up), width_down_ps,
                      derate(n_down, car_down));
}

std::int64_t find_delay_ps(const TimeTagStream& a, const TimeTagStream& b,
                           std::int64_t search_halfwidth_ps,
                           std::int64_t coarse_bin_ps) {
    if (coarse_bin_ps < 1)
        throw std::invalid_argument("find_delay: coarse bin must be >= 1 ps");
    if (search_halfwidth_ps < coarse_bin_ps)
        throw std::invalid_argument("find_delay: search range below one bin");
    const std::int64_t w =
        (search_halfwidth_ps + coarse_bin_ps - 1) / coarse_bin_ps *
        coarse_bin_ps;
    const CoincidenceHistogram h = cross_correlate(a, b, w, coarse_bin_ps, 0);
    if (h.total() == 0) throw NoPeakError("find_delay: no pairs in range");
    std::size_t imax = 0;
    for (std::size_t i = 1; i < h.size(); ++i)
        if (h.counts[i] > h.counts[imax]) imax = i;
    return std::llround(h.bin_center_ps(imax));
}

namespace {

int thread_budget() {
    if (const char* env = std::getenv("QTWTT_THREADS")) {
        const int v = std::atoi(env);
        if (v >= 1) return std::min(v, 256);
    }
    const unsigned hc = std::thread::hardware_concurrency();
    return hc > 0 ? static_cast<int>(hc) : 1;
}

struct WindowOutcome {
    bool ok = false;
    TwttWindowResult w;
};

}  // namespace

TwttSeries analyze_series(const std::array<TimeTagStream, 4>& streams,
                          double window_s, const CoincidenceParams& params) {
    if (!(window_s > 0.0))
        throw std::invalid_argument("analyze_series: window must be positive");
    const auto window_ps =
        static_cast<std::int64_t>(std::llround(window_s * kPsPerS));

    std::int64_t start = streams[0].span().start_ps;
    std::int64_t end = streams[0].span().end_ps;
    for (const auto& s : streams) {
        start = std::max(start, s.span().start_ps);
        end = std::min(end, s.span().end_ps);
    }
    if (end - start < window_ps)
        throw std::invalid_argument(
            "analyze_series: streams shorter than one window");
    const int nwin = static_cast<int>((end - start) / window_ps);

    const TimeTagStream& d1 = streams[0];
    const TimeTagStream& d2 = streams[1];
    const TimeTagStream& d3 = streams[2];
    const TimeTagStream& d4 = streams[3];

    // One static guess pair for the whole series keeps windows independent
    // of each other (and therefore of the thread partitioning).
    std::optional<std::int64_t> guess_up = params.guess_up_ps;
    std::optional<std::int64_t> guess_down = params.guess_down_ps;
    for (int k = 0; k < nwin && (!guess_up || !guess_down); ++k) {
        const std::int64_t w0 = start + static_cast<std::int64_t>(k) * window_ps;
        const std::int64_t w1 = w0 + window_ps;
        try {
            if (!guess_up)
                guess_up = find_delay_ps(slice_window(d3, w0, w1),
                                         slice_window(d1, w0, w1),
                                         params.search_halfwidth_ps,
                                         params.coarse_bin_ps);
            if (!guess_down)
                guess_down = find_delay_ps(slice_window(d4, w0, w1),
                                           slice_window(d2, w0, w1),
                                           params.search_halfwidth_ps,
                                           params.coarse_bin_ps);
        } catch (const NoPeakError&) {
            guess_up.reset();
            guess_down.reset();
        }
    }

    TwttSeries series;
    series.window_s = window_s;
    series.start_ps = start;
    series.total_windows = nwin;
    if (!guess_up || !guess_down) {
        for (int k = 0; k < nwin; ++k) series.gap_indices.push_back(k);
        return series;
    }
    const std::int64_t gu = *guess_up;
    const std::int64_t gd = *guess_down;

    std::vector<WindowOutcome> slots(static_cast<std::size_t>(nwin));
    auto analyze_one = [&](int k) {
        const std::int64_t w0 = start + static_cast<std::int64_t>(k) * window_ps;
        const std::int64_t w1 = w0 + window_ps;
        WindowOutcome& slot = slots[static_cast<std::size_t>(k)];
        try {
            const CoincidenceHistogram hu =
                cross_correlate(slice_window(d3, w0, w1),
                                slice_window(d1, w0, w1), params.window_ps,
                                params.bin_width_ps, gu);
            const CoincidenceHistogram hd =
                cross_correlate(slice_window(d4, w0, w1),
                                slice_window(d2, w0, w1), params.window_ps,
                                params.bin_width_ps, gd);
            TwttWindowResult w;
            w.index = k;
            w.window_start_ps = w0;
            w.up_fit = fit_peak(hu);
            w.down_fit = fit_peak(hd);
            w.t0_ps = recover_offset(w.up_fit.center_ps, w.down_fit.center_ps);
            const double wu = convert_width(w.up_fit.sigma_ps,
                                            WidthConvention::sigma,
                                            WidthConvention::one_over_e_half);
            const double wd = convert_width(w.down_fit.sigma_ps,
                                            WidthConvention::sigma,
                                            WidthConvention::one_over_e_half);
            w.predicted_sd_eq2_ps = predict_sd(wu, w.up_fit.pair_count, wd,
                                               w.down_fit.pair_count);
            try {
                w.predicted_sd_eq3_ps =
                    predict_sd_car(wu, w.up_fit.pair_count, w.up_fit.car, wd,
                                   w.down_fit.pair_count, w.down_fit.car);
            } catch (const std::invalid_argument&) {
                // Degenerate CAR estimate; fall back to the plain prediction.
                w.predicted_sd_eq3_ps = w.predicted_sd_eq2_ps;
            }
            slot.w = w;
            slot.ok = true;
        } catch (const NoPeakError&) {
        } catch (const NonConvergenceError&) {
        } catch (const std::invalid_argument&) {
        }
    };

    const int nthreads = std::min(thread_budget(), nwin);
    if (nthreads <= 1) {
        for (int k = 0; k < nwin; ++k) analyze_one(k);
    } else {
        std::vector<std::thread> pool;
        pool.reserve(static_cast<std::size_t>(nthreads));
        for (int t = 0; t < nthreads; ++t) {
            pool.emplace_back([&, t]() {
                for (int k = t; k < nwin; k += nthreads) analyze_one(k);
            });
        }
        for (auto& th : pool) th.join();
    }

    for (int k = 0; k < nwin; ++k) {
        if (slots[static_cast<std::size_t>(k)].ok)
            series.results.push_back(slots[static_cast<std::size_t>(k)].w);
        else
            series.gap_indices.push_back(k);
    }
    return series;
}

PhaseSeries to_phase_series(const TwttSeries& s) {
    PhaseSeries p;
    p.tau0_s = s.window_s;
    p.x_s.assign(static_cast<std::size_t>(s.total_windows), 0.0);
    p.valid.assign(static_cast<std::size_t>(s.total_windows), false);
    for (const auto& w : s.results) {
        p.x_s[static_cast<std::size_t>(w.index)] = w.t0_ps / kPsPerS;
        p.valid[static_cast<std::size_t>(w.index)] = true;
    }
    return p;
}

}  // namespace qtwtt
