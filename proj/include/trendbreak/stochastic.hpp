#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "trendbreak/rng.hpp"
#include "trendbreak/scan.hpp"
#include "trendbreak/selection.hpp"
#include "trendbreak/series.hpp"

namespace trendbreak {

enum class NoiseKind { white, arfima };

inline const char* to_string(NoiseKind k) {
    return k == NoiseKind::white ? "white" : "arfima";
}

/// i.i.d. N(0, sigma^2), value t drawn from counter index t of the stream.
inline std::vector<double> gaussian_noise(int n, double sigma, std::uint64_t seed) {
    if (n < 1) throw std::invalid_argument("gaussian_noise: n >= 1");
    if (sigma <= 0.0) throw std::invalid_argument("gaussian_noise: sigma > 0");
    std::vector<double> out(n);
    for (int t = 1; t <= n; ++t) out[t - 1] = sigma * normal_at(seed, t);
    return out;
}

namespace detail {

/// MA(inf) weights of (1-B)^-d: psi_0 = 1, psi_j = psi_{j-1} (j-1+d)/j.
inline std::vector<double> arfima_psi(double d, int lags) {
    std::vector<double> psi(lags + 1);
    psi[0] = 1.0;
    for (int j = 1; j <= lags; ++j) psi[j] = psi[j - 1] * (j - 1 + d) / j;
    return psi;
}

} // namespace detail

/// Fractionally integrated Gaussian noise, ARFIMA(0, d, 0), via the MA(inf)
/// representation truncated at max(n, 1000) lags and rescaled so the
/// marginal standard deviation equals sigma. Innovation t-j comes from
/// counter index t-j, so d = 0 reproduces gaussian_noise bit for bit.
inline std::vector<double> arfima_noise(int n, double d, double sigma,
                                        std::uint64_t seed) {
    if (n < 1) throw std::invalid_argument("arfima_noise: n >= 1");
    if (sigma <= 0.0) throw std::invalid_argument("arfima_noise: sigma > 0");
    if (!(d > -0.5 && d < 0.5))
        throw std::domain_error("arfima_noise: d must be in (-0.5, 0.5), got " +
                                std::to_string(d));
    const int lags = std::max(n, 1000);
    const auto psi = detail::arfima_psi(d, lags);
    long double wsum2 = 0.0L;
    for (double w : psi) wsum2 += static_cast<long double>(w) * w;
    const double scale = sigma / std::sqrt(static_cast<double>(wsum2));

    // innovations indexed 1-lags .. n, shared across t through the counter RNG
    std::vector<double> eps(n + lags);
    for (int k = 1 - lags; k <= n; ++k)
        eps[k + lags - 1] = normal_at(seed, k);

    std::vector<double> out(n);
    for (int t = 1; t <= n; ++t) {
        long double acc = 0.0L;
        const double* e = eps.data() + (t + lags - 1); // eps index t
        for (int j = 0; j <= lags; ++j) acc += psi[j] * e[-j];
        out[t - 1] = scale * static_cast<double>(acc);
    }
    return out;
}

/// Configuration of one synthetic series: an optional continuous two-slope
/// trend (flat-by-default first segment) plus white or long-memory noise.
struct SynthConfig {
    int n_years = 70;
    std::optional<int> change_index; // T*, in 1..n_years; none = single trend
    double slope1 = 0.0;             // unit/year before T* (or everywhere)
    double slope2 = 0.0;             // unit/year after T*
    double sigma = 0.45;
    NoiseKind noise = NoiseKind::white;
    double d = 0.0;                  // ARFIMA memory parameter
    std::uint64_t seed = 0;
    int start_year = 1;
};

/// Deterministic trend of a config at time index t (1-based).
inline double synth_trend_at(const SynthConfig& cfg, int t) {
    if (!cfg.change_index) return cfg.slope1 * t;
    const int T = *cfg.change_index;
    return t <= T ? cfg.slope1 * (t - T) : cfg.slope2 * (t - T);
}

inline AnnualSeries synth_series(const SynthConfig& cfg) {
    if (cfg.n_years < 1) throw std::invalid_argument("synth_series: n_years >= 1");
    if (cfg.sigma <= 0.0) throw std::invalid_argument("synth_series: sigma > 0");
    if (cfg.change_index &&
        (*cfg.change_index < 1 || *cfg.change_index > cfg.n_years))
        throw std::invalid_argument("synth_series: change_index outside series");
    const auto noise = cfg.noise == NoiseKind::white
                           ? gaussian_noise(cfg.n_years, cfg.sigma, cfg.seed)
                           : arfima_noise(cfg.n_years, cfg.d, cfg.sigma, cfg.seed);
    AnnualSeries s;
    s.start_year = cfg.start_year;
    s.values.resize(cfg.n_years);
    for (int t = 1; t <= cfg.n_years; ++t)
        s.values[t - 1] = synth_trend_at(cfg, t) + noise[t - 1];
    return s;
}

struct EnsembleOptions {
    int margin = 10;
    bool allow_small_margin = false;
};

/// Aggregate results of repeated scan + selection over synthetic members.
struct EnsembleSummary {
    int members = 0;
    std::map<int, int> change_year_histogram; // detected change year -> count
    std::vector<double> delta_bic_single_minus_dual; // per member
    double frac_within_5 = 0.0;  // |T_hat - T*| <= 5, when T* exists
    double frac_within_8 = 0.0;
    double selection_accuracy = 0.0; // fraction preferring the true model
    int dual_preferred = 0;
};

/// Run scan_change_point + select_model on `members` independent synthetic
/// series. Member m uses stream m of the config seed, so the summary is
/// reproducible at any parallelism.
inline EnsembleSummary ensemble_experiment(const SynthConfig& cfg, int members,
                                           const EnsembleOptions& opt = {}) {
    if (members < 1) throw std::invalid_argument("ensemble_experiment: members >= 1");
    EnsembleSummary sum;
    sum.members = members;
    sum.delta_bic_single_minus_dual.resize(members);

    int n5 = 0, n8 = 0, correct = 0, dual = 0;
    ScanOptions sopt;
    sopt.margin = opt.margin;
    sopt.allow_small_margin = opt.allow_small_margin;

    for (int m = 0; m < members; ++m) {
        SynthConfig c = cfg;
        c.seed = derive_seed(cfg.seed, static_cast<std::uint64_t>(m));
        const AnnualSeries s = synth_series(c);
        const ScanResult scan = scan_change_point(s, sopt);
        const ModelSelection sel = select_model(s, scan);

        ++sum.change_year_histogram[scan.best.change_year];
        sum.delta_bic_single_minus_dual[m] = -sel.delta_bic;
        const bool is_dual = sel.preferred == Model::dual;
        dual += is_dual;
        if (cfg.change_index) {
            const int err = std::abs(scan.best.change_index - *cfg.change_index);
            n5 += err <= 5;
            n8 += err <= 8;
            correct += is_dual;
        } else {
            correct += !is_dual;
        }
    }
    sum.frac_within_5 = static_cast<double>(n5) / members;
    sum.frac_within_8 = static_cast<double>(n8) / members;
    sum.selection_accuracy = static_cast<double>(correct) / members;
    sum.dual_preferred = dual;
    return sum;
}

} // namespace trendbreak
