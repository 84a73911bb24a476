#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "trendbreak/segfit.hpp"
#include "trendbreak/series.hpp"

namespace trendbreak {

struct ScanPoint {
    int change_year = 0;
    double rmse = 0.0;
};

struct ScanOptions {
    int margin = 10;           // years excluded at each end
    bool tie_latest = false;   // tie-break of near-equal minima; default earliest
    double closeness_factor = 1.02; // relative-minima reporting window
    bool allow_small_margin = false; // diagnostic mode: permits margin < 2
};

struct ScanResult {
    std::vector<ScanPoint> rmse_curve; // ordered by change year
    DualFit best;
    std::vector<ScanPoint> candidates; // relative minima, sorted by rmse
    int margin = 0;
};

/// Interior strict local minima of an rmse curve whose value is within
/// closeness_factor of the global minimum, sorted by rmse (global minimum
/// always included). Plateaus report their leftmost point.
inline std::vector<ScanPoint> relative_minima(const std::vector<ScanPoint>& curve,
                                              double closeness_factor = 1.02) {
    if (curve.size() < 3) {
        if (curve.empty()) return {};
        std::size_t gi = 0;
        for (std::size_t i = 1; i < curve.size(); ++i)
            if (curve[i].rmse < curve[gi].rmse) gi = i;
        return {curve[gi]};
    }

    std::size_t gi = 0;
    for (std::size_t i = 1; i < curve.size(); ++i)
        if (curve[i].rmse < curve[gi].rmse) gi = i;
    const double cutoff = closeness_factor * curve[gi].rmse;

    std::vector<ScanPoint> out;
    for (std::size_t i = 1; i + 1 < curve.size(); ++i) {
        const double v = curve[i].rmse;
        if (curve[i - 1].rmse == v) continue; // not the leftmost point of a plateau
        if (v >= curve[i - 1].rmse) continue;
        // skip over a plateau of equal values to the next differing one
        std::size_t j = i + 1;
        while (j < curve.size() && curve[j].rmse == v) ++j;
        if (j == curve.size()) break; // plateau runs to the end: not interior
        if (v < curve[j].rmse && v <= cutoff) out.push_back(curve[i]);
    }
    const bool has_global =
        std::any_of(out.begin(), out.end(),
                    [&](const ScanPoint& p) { return p.change_year == curve[gi].change_year; });
    if (!has_global) out.push_back(curve[gi]);
    std::sort(out.begin(), out.end(), [](const ScanPoint& a, const ScanPoint& b) {
        return a.rmse != b.rmse ? a.rmse < b.rmse : a.change_year < b.change_year;
    });
    return out;
}

/// Exhaustive scan of the change index over margin <= T <= n - margin.
/// Ties within 1e-12 relative rmse resolve to the smallest T (largest if
/// tie_latest is set). Deterministic for identical input.
inline ScanResult scan_change_point(const AnnualSeries& series,
                                    const ScanOptions& opt = {}) {
    const int n = series.n();
    int margin = opt.margin;
    if (!opt.allow_small_margin && margin < 2)
        throw std::invalid_argument("margin must be >= 2 (margin=" +
                                    std::to_string(margin) +
                                    "; set allow_small_margin for diagnostics)");
    if (margin < 0) throw std::invalid_argument("margin must be >= 0");
    if (n < 2 * margin + 1)
        throw std::invalid_argument("series length " + std::to_string(n) +
                                    " < 2*margin+1 = " + std::to_string(2 * margin + 1));

    const int lo = std::max(2, margin);
    const int hi = std::min(n - 2, n - margin);
    if (lo > hi)
        throw std::invalid_argument("no admissible change index for n=" +
                                    std::to_string(n) + ", margin=" +
                                    std::to_string(margin));

    const detail::PrefixSums ps(series.values);

    ScanResult res;
    res.margin = margin;
    res.rmse_curve.reserve(hi - lo + 1);

    int best_T = -1;
    double best_rmse = 0.0;
    detail::DualCoeffs best_c{};
    constexpr double tie_rel = 1e-12;

    for (int T = lo; T <= hi; ++T) {
        const auto c = detail::dual_coeffs(n, T, ps.segment_sums(T));
        const double rmse =
            std::sqrt(static_cast<double>(detail::dual_rss(series.values, T, c)) / n);
        res.rmse_curve.push_back({series.year_of(T), rmse});
        bool better;
        if (best_T < 0) {
            better = true;
        } else if (rmse < best_rmse * (1.0 - tie_rel)) {
            better = true;
        } else if (rmse <= best_rmse * (1.0 + tie_rel)) {
            better = opt.tie_latest; // tie: keep earliest unless asked otherwise
        } else {
            better = false;
        }
        if (better) {
            best_T = T;
            best_rmse = rmse;
            best_c = c;
        }
    }

    res.best = detail::make_dual_fit(series, best_T, best_c);
    res.candidates = relative_minima(res.rmse_curve, opt.closeness_factor);
    // under the latest-year tie rule the best fit can be the mirror of the
    // reported leftmost minimum; keep the invariant that it is listed
    const bool has_best = std::any_of(
        res.candidates.begin(), res.candidates.end(),
        [&](const ScanPoint& p) { return p.change_year == res.best.change_year; });
    if (!has_best) {
        res.candidates.push_back({res.best.change_year, res.best.rmse});
        std::sort(res.candidates.begin(), res.candidates.end(),
                  [](const ScanPoint& a, const ScanPoint& b) {
                      return a.rmse != b.rmse ? a.rmse < b.rmse
                                              : a.change_year < b.change_year;
                  });
    }
    return res;
}

} // namespace trendbreak
