#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "trendbreak/memory.hpp"
#include "trendbreak/parallel.hpp"
#include "trendbreak/scan.hpp"
#include "trendbreak/segfit.hpp"
#include "trendbreak/series.hpp"
#include "trendbreak/stochastic.hpp"

namespace trendbreak {

/// Slope-gap test statistic s = |a1 - a2|.
inline double slope_gap(const DualFit& fit) { return std::abs(fit.a1 - fit.a2); }

struct SigConfig {
    int ensemble_size = 1000;
    NoiseKind noise = NoiseKind::white;
    std::optional<double> d;   // ARFIMA memory; DFA-estimated from residuals if unset
    std::uint64_t seed = 0;
    double confidence = 0.95;  // one-sided level
    int bin_width = 5;         // years per change-time bin
    int min_bin_samples = 50;  // pool neighbor bins until this many samples
    int margin = 10;
    bool allow_small_margin = false;
    int workers = 1;
};

struct NullSample {
    int change_year = 0;
    double s = 0.0;
};

struct SignificanceResult {
    double s_obs = 0.0;
    int change_year_obs = 0;
    double threshold = 0.0;   // conditional one-sided quantile of the null s
    bool reject = false;      // s_obs > threshold
    int ensemble_size = 0;
    double confidence = 0.95;
    int bin_width = 0;
    int min_bin_samples = 0;
    int pooled_samples = 0;       // null samples behind the threshold
    bool pooled_fallback = false; // true if the unconditional quantile was used
    double sigma_null = 0.0;      // residual sigma of the surrogate generator
    NoiseKind noise = NoiseKind::white;
    double d_null = 0.0;          // memory parameter of the surrogate noise
};

namespace detail {

struct NullModel {
    double slope, intercept, sigma;
    double d; // 0 for white noise
};

inline NullModel null_model(const AnnualSeries& series, const SigConfig& cfg) {
    const int n = series.n();
    if (n < 3) throw std::invalid_argument("null model needs n >= 3");
    const LinearFit f = fit_single(series);
    NullModel m{};
    m.slope = f.slope;
    m.intercept = f.intercept;
    m.sigma = std::sqrt(f.rss / (n - 2));
    if (m.sigma <= 0.0)
        throw std::invalid_argument("null model: zero residual variance");
    m.d = 0.0;
    if (cfg.noise == NoiseKind::arfima) {
        if (cfg.d) {
            m.d = *cfg.d;
        } else {
            m.d = std::clamp(dfa_estimate(single_fit_residuals(series)).d, -0.49, 0.49);
        }
    }
    return m;
}

} // namespace detail

/// Distribution of (detected change year, slope gap) over surrogates drawn
/// from the no-change null: the fitted single line plus synthetic noise at
/// the residual sigma. Surrogate i uses stream i+1 of the seed, so output
/// is identical for any worker count.
inline std::vector<NullSample> null_ensemble(const AnnualSeries& series,
                                             const SigConfig& cfg) {
    if (cfg.ensemble_size < 200)
        throw std::invalid_argument("null_ensemble: ensemble_size >= 200 required "
                                    "(quantiles too noisy below that)");
    const int n = series.n();
    const auto model = detail::null_model(series, cfg);

    ScanOptions sopt;
    sopt.margin = cfg.margin;
    sopt.allow_small_margin = cfg.allow_small_margin;
    // surface margin/length problems here, not inside a worker thread
    scan_change_point(series, sopt);

    std::vector<NullSample> out(cfg.ensemble_size);
    parallel_for(cfg.ensemble_size, cfg.workers, [&](int i) {
        const std::uint64_t s = derive_seed(cfg.seed, static_cast<std::uint64_t>(i) + 1);
        const auto noise = cfg.noise == NoiseKind::white
                               ? gaussian_noise(n, model.sigma, s)
                               : arfima_noise(n, model.d, model.sigma, s);
        AnnualSeries surr;
        surr.start_year = series.start_year;
        surr.values.resize(n);
        for (int t = 1; t <= n; ++t)
            surr.values[t - 1] = model.slope * t + model.intercept + noise[t - 1];
        const ScanResult sc = scan_change_point(surr, sopt);
        out[i] = {sc.best.change_year, slope_gap(sc.best)};
    });
    return out;
}

namespace detail {

/// One-sided empirical quantile: k-th smallest with k = ceil(q*m).
inline double upper_quantile(std::vector<double>& v, double q) {
    const auto m = static_cast<long>(v.size());
    const long k = std::max(1L, static_cast<long>(std::ceil(q * m)));
    std::nth_element(v.begin(), v.begin() + (k - 1), v.end());
    return v[k - 1];
}

struct ConditionalThreshold {
    double value = 0.0;
    int pooled = 0;
    bool fallback = false;
};

/// Quantile of the null s conditional on the change-time bin of the
/// observation, pooling neighbor bins symmetrically until min_samples.
inline ConditionalThreshold conditional_threshold(const std::vector<NullSample>& null_s,
                                                  int change_year_obs, int first_year,
                                                  int last_year, int bin_width,
                                                  int min_samples, double q) {
    const int n_bins = (last_year - first_year) / bin_width + 1;
    const auto bin_of = [&](int year) {
        return std::clamp((year - first_year) / bin_width, 0, n_bins - 1);
    };
    const int b_obs = bin_of(change_year_obs);

    ConditionalThreshold out;
    std::vector<double> pool;
    for (int dist = 0; dist < n_bins; ++dist) {
        pool.clear();
        for (const auto& ns : null_s)
            if (std::abs(bin_of(ns.change_year) - b_obs) <= dist) pool.push_back(ns.s);
        if (static_cast<int>(pool.size()) >= min_samples) break;
    }
    if (static_cast<int>(pool.size()) < min_samples) {
        // even the full ensemble is too small: unconditional with a warning
        pool.clear();
        for (const auto& ns : null_s) pool.push_back(ns.s);
        out.fallback = true;
    }
    out.pooled = static_cast<int>(pool.size());
    out.value = upper_quantile(pool, q);
    return out;
}

} // namespace detail

/// Monte Carlo test of the no-trend-change null at the configured one-sided
/// confidence level, with the threshold conditional on the detected change
/// time (binned, neighbor-pooled). This overload reuses an existing scan of
/// the observed series.
inline SignificanceResult test_change_point(const AnnualSeries& series,
                                            const ScanResult& obs,
                                            const SigConfig& cfg) {
    if (cfg.bin_width < 1 || cfg.min_bin_samples < 1)
        throw std::invalid_argument("test_change_point: bin_width and "
                                    "min_bin_samples must be >= 1");
    if (!(cfg.confidence > 0.0 && cfg.confidence < 1.0))
        throw std::invalid_argument("test_change_point: confidence in (0, 1)");
    const auto null_s = null_ensemble(series, cfg);
    const auto model = detail::null_model(series, cfg);

    const int n = series.n();
    const int lo = std::max(2, cfg.margin);
    const int hi = std::min(n - 2, n - cfg.margin);
    const auto thr = detail::conditional_threshold(
        null_s, obs.best.change_year, series.year_of(lo), series.year_of(hi),
        cfg.bin_width, cfg.min_bin_samples, cfg.confidence);

    SignificanceResult r;
    r.s_obs = slope_gap(obs.best);
    r.change_year_obs = obs.best.change_year;
    r.threshold = thr.value;
    r.reject = r.s_obs > r.threshold;
    r.ensemble_size = cfg.ensemble_size;
    r.confidence = cfg.confidence;
    r.bin_width = cfg.bin_width;
    r.min_bin_samples = cfg.min_bin_samples;
    r.pooled_samples = thr.pooled;
    r.pooled_fallback = thr.fallback;
    r.sigma_null = model.sigma;
    r.noise = cfg.noise;
    r.d_null = model.d;
    return r;
}

inline SignificanceResult test_change_point(const AnnualSeries& series,
                                            const SigConfig& cfg) {
    ScanOptions sopt;
    sopt.margin = cfg.margin;
    sopt.allow_small_margin = cfg.allow_small_margin;
    const ScanResult obs = scan_change_point(series, sopt);
    return test_change_point(series, obs, cfg);
}

} // namespace trendbreak
