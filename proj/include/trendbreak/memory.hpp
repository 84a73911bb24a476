#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "trendbreak/segfit.hpp"
#include "trendbreak/series.hpp"

namespace trendbreak {

/// Gamma function by the Lanczos approximation (g = 7, 9 terms), with the
/// reflection formula for x < 1/2. Relative accuracy is around 1e-14 on
/// the ranges used here.
inline double gamma_function(double x) {
    if (x <= 0.0 && x == std::floor(x))
        throw std::domain_error("gamma_function: pole at nonpositive integer " +
                                std::to_string(x));
    static constexpr std::array<double, 9> coef = {
        0.99999999999980993,   676.5203681218851,    -1259.1392167224028,
        771.32342877765313,    -176.61502916214059,  12.507343278686905,
        -0.13857109526572012,  9.9843695780195716e-6, 1.5056327351493116e-7};
    constexpr double g = 7.0;
    constexpr double sqrt_two_pi = 2.5066282746310005024;

    if (x < 0.5) {
        // Gamma(x) Gamma(1-x) = pi / sin(pi x)
        const double pi = 3.14159265358979323846;
        return pi / (std::sin(pi * x) * gamma_function(1.0 - x));
    }
    const double z = x - 1.0;
    double a = coef[0];
    for (int i = 1; i < 9; ++i) a += coef[i] / (z + i);
    const double t = z + g + 0.5;
    return sqrt_two_pi * std::pow(t, z + 0.5) * std::exp(-t) * a;
}

struct SeriesSum {
    double value = 0.0;
    bool converged = true;
    long terms = 0;
};

/// Gauss hypergeometric 2F1(1, d; 1-d; phi) by direct power series:
/// term_0 = 1, term_{n+1} = term_n * phi * (d+n) / (1-d+n). Converges for
/// |phi| < 1; the convergence flag drops only if the 1e-15 term cutoff is
/// not reached within the iteration cap (extremely close |phi| -> 1).
inline SeriesSum hyp2f1_series(double d, double phi) {
    if (!(std::abs(phi) < 1.0))
        throw std::domain_error("hyp2f1: series requires |phi| < 1, got " +
                                std::to_string(phi));
    const double c0 = 1.0 - d;
    if (c0 <= 0.0 && c0 == std::floor(c0))
        throw std::domain_error("hyp2f1: lower parameter 1-d is a nonpositive integer");

    SeriesSum out;
    double sum = 1.0, term = 1.0;
    constexpr long cap = 2000000;
    long n = 0;
    while (std::abs(term) >= 1e-15 && n < cap) {
        term *= phi * (d + n) / (1.0 - d + n);
        sum += term;
        ++n;
    }
    out.value = sum;
    out.terms = n;
    out.converged = n < cap;
    return out;
}

inline double hyp2f1_1d(double d, double phi) { return hyp2f1_series(d, phi).value; }

/// Prefactor converting noise variance into trend-estimator variance for
/// an ARFIMA(1, d)-type noise model:
///
///   f(phi, d) = (1+phi) / ((1-phi) (2 2F1(1,d;1-d;phi) - 1))
///             * 36 (1-2d) Gamma(1-d) / ((1+2d)(3+2d) Gamma(1+d))
///
/// where the d Gamma(d) denominator has been rewritten as Gamma(1+d), so
/// the function is regular and continuous at d = 0 with f(0, 0) = 12.
inline double f_factor(double phi, double d) {
    if (!(std::abs(phi) < 1.0))
        throw std::domain_error("f_factor: requires |phi| < 1");
    if (!(d > -0.5 && d < 0.5))
        throw std::domain_error("f_factor: requires d in (-0.5, 0.5)");
    const double F = hyp2f1_1d(d, phi);
    const double denom = (1.0 - phi) * (2.0 * F - 1.0);
    if (denom <= 0.0)
        throw std::domain_error("f_factor: nonpositive correlation denominator");
    const double part1 = (1.0 + phi) / denom;
    const double part2 = 36.0 * (1.0 - 2.0 * d) * gamma_function(1.0 - d) /
                         ((1.0 + 2.0 * d) * (3.0 + 2.0 * d) * gamma_function(1.0 + d));
    return part1 * part2;
}

/// Asymptotic variance of the least-squares slope over n points of noise
/// with variance sigma2 and correlation parameters (phi, d):
/// sigma^2[m^] = sigma2 * f(phi, d) * n^(2d-3).
inline double trend_variance(double sigma2, double phi, double d, int n) {
    if (n < 3) throw std::invalid_argument("trend_variance: n >= 3");
    if (sigma2 < 0.0) throw std::domain_error("trend_variance: sigma2 >= 0");
    return sigma2 * f_factor(phi, d) * std::pow(static_cast<double>(n), 2.0 * d - 3.0);
}

namespace detail {

/// Least-squares polynomial fit of y against centered 0..m-1, returning
/// the mean squared residual of the window.
inline double window_msr(const double* y, int m, int order) {
    const int k = order + 1;
    std::array<std::array<long double, 5>, 4> a{}; // up to cubic
    std::array<long double, 4> rhs{};
    const long double mid = (m - 1) / 2.0L;
    std::array<long double, 7> pw{}; // power sums of centered index
    for (int i = 0; i < m; ++i) {
        const long double u = i - mid;
        long double up = 1.0L;
        for (int p = 0; p <= 2 * order; ++p) {
            pw[p] += up;
            up *= u;
        }
    }
    for (int r = 0; r < k; ++r)
        for (int c = 0; c < k; ++c) a[r][c] = pw[r + c];
    for (int i = 0; i < m; ++i) {
        const long double u = i - mid;
        long double up = 1.0L;
        for (int r = 0; r < k; ++r) {
            rhs[r] += up * y[i];
            up *= u;
        }
    }
    // solve a * beta = rhs (tiny SPD system; plain elimination suffices)
    for (int col = 0; col < k; ++col) {
        int piv = col;
        for (int r = col + 1; r < k; ++r)
            if (std::abs(static_cast<double>(a[r][col])) >
                std::abs(static_cast<double>(a[piv][col])))
                piv = r;
        std::swap(a[col], a[piv]);
        std::swap(rhs[col], rhs[piv]);
        for (int r = 0; r < k; ++r) {
            if (r == col) continue;
            const long double f = a[r][col] / a[col][col];
            for (int c = col; c < k; ++c) a[r][c] -= f * a[col][c];
            rhs[r] -= f * rhs[col];
        }
    }
    std::array<long double, 4> beta{};
    for (int i = 0; i < k; ++i) beta[i] = rhs[i] / a[i][i];

    long double msr = 0.0L;
    for (int i = 0; i < m; ++i) {
        const long double u = i - mid;
        long double fitv = 0.0L, up = 1.0L;
        for (int r = 0; r < k; ++r) {
            fitv += beta[r] * up;
            up *= u;
        }
        const long double res = y[i] - fitv;
        msr += res * res;
    }
    return static_cast<double>(msr / m);
}

} // namespace detail

struct DfaOptions {
    int order = 1;              // detrending polynomial order (1..3)
    std::vector<int> scales;    // explicit window sizes; empty = default grid
};

struct DfaResult {
    double h = 0.0;             // fluctuation (Hurst) exponent
    double d = 0.0;             // h - 1/2
    double slope_stderr = 0.0;  // regression error of the log-log slope
    std::vector<int> scales;
    std::vector<double> log_f;  // ln F(s), aligned with scales
};

/// Default DFA scale grid: quarter-octave spacing over [4, n/4].
inline std::vector<int> dfa_default_scales(int n) {
    std::vector<int> s;
    const int smax = n / 4;
    for (int k = 0;; ++k) {
        const int v = static_cast<int>(std::lround(4.0 * std::pow(2.0, k / 4.0)));
        if (v > smax) break;
        if (s.empty() || v != s.back()) s.push_back(v);
    }
    return s;
}

/// Detrended fluctuation analysis of order `order`: cumulative profile,
/// per-window polynomial detrending anchored at both series ends,
/// F(s) = sqrt(mean squared residual), H = slope of ln F vs ln s.
inline DfaResult dfa_estimate(const std::vector<double>& x, DfaOptions opt = {}) {
    const int n = static_cast<int>(x.size());
    if (n < 64)
        throw std::invalid_argument("dfa_estimate: need at least 64 points, got " +
                                    std::to_string(n));
    if (opt.order < 1 || opt.order > 3)
        throw std::invalid_argument("dfa_estimate: order must be 1..3");
    std::vector<int> scales = opt.scales.empty() ? dfa_default_scales(n) : opt.scales;
    std::sort(scales.begin(), scales.end());
    scales.erase(std::unique(scales.begin(), scales.end()), scales.end());
    for (int s : scales)
        if (s < opt.order + 2 || s > n / 4)
            throw std::invalid_argument("dfa_estimate: scale " + std::to_string(s) +
                                        " outside [order+2, n/4]");
    if (scales.size() < 4)
        throw std::invalid_argument("dfa_estimate: need at least 4 scales");

    double mean = 0.0;
    for (double v : x) mean += v;
    mean /= n;
    std::vector<double> prof(n);
    long double acc = 0.0L;
    for (int i = 0; i < n; ++i) {
        acc += x[i] - mean;
        prof[i] = static_cast<double>(acc);
    }

    DfaResult res;
    res.scales = scales;
    for (int s : scales) {
        const int ns = n / s;
        long double msr = 0.0L;
        for (int v = 0; v < ns; ++v) // windows anchored at the start
            msr += detail::window_msr(prof.data() + v * s, s, opt.order);
        for (int v = 0; v < ns; ++v) // and at the end
            msr += detail::window_msr(prof.data() + (n - (v + 1) * s), s, opt.order);
        res.log_f.push_back(0.5 * std::log(static_cast<double>(msr / (2 * ns))));
    }

    // least-squares line of ln F against ln s
    const int m = static_cast<int>(scales.size());
    long double sx = 0.0L, sy = 0.0L, sxx = 0.0L, sxy = 0.0L;
    for (int i = 0; i < m; ++i) {
        const long double lx = std::log(static_cast<double>(scales[i]));
        sx += lx;
        sy += res.log_f[i];
        sxx += lx * lx;
        sxy += lx * res.log_f[i];
    }
    const long double denom = m * sxx - sx * sx;
    const double slope = static_cast<double>((m * sxy - sx * sy) / denom);
    const double icept = static_cast<double>((sy - slope * sx) / m);
    long double rss = 0.0L;
    for (int i = 0; i < m; ++i) {
        const long double r =
            res.log_f[i] - (slope * std::log(static_cast<double>(scales[i])) + icept);
        rss += r * r;
    }
    res.h = slope;
    res.d = slope - 0.5;
    res.slope_stderr =
        m > 2 ? std::sqrt(static_cast<double>(rss / (m - 2) * m / denom)) : 0.0;
    return res;
}

inline DfaResult dfa_estimate(const AnnualSeries& s, DfaOptions opt = {}) {
    return dfa_estimate(s.values, std::move(opt));
}

/// Grunwald-Letnikov fractional difference (1-B)^d with binomial weights
/// w_0 = 1, w_j = w_{j-1} (j-1-d)/j; y_t = sum_{j<t} w_j x_{t-j}.
inline std::vector<double> gl_fractional_diff(const std::vector<double>& x, double d) {
    if (!(d >= 0.0 && d <= 1.0))
        throw std::domain_error("gl_fractional_diff: d must be in [0, 1]");
    const int n = static_cast<int>(x.size());
    std::vector<double> w(n);
    if (n > 0) w[0] = 1.0;
    for (int j = 1; j < n; ++j) w[j] = w[j - 1] * (j - 1 - d) / j;
    std::vector<double> y(n);
    for (int t = 1; t <= n; ++t) {
        long double s = 0.0L;
        for (int j = 0; j < t; ++j) s += w[j] * x[t - 1 - j];
        y[t - 1] = static_cast<double>(s);
    }
    return y;
}

/// Short-range parameter: fractionally difference by d, subtract the mean,
/// and return the lag-1 sample autocorrelation clamped to (-0.999, 0.999).
inline double estimate_phi(const std::vector<double>& x, double d) {
    const int n = static_cast<int>(x.size());
    if (n < 30)
        throw std::invalid_argument("estimate_phi: need at least 30 points, got " +
                                    std::to_string(n));
    const auto y = gl_fractional_diff(x, d);
    long double mean = 0.0L;
    for (double v : y) mean += v;
    mean /= n;
    long double num = 0.0L, den = 0.0L;
    for (int i = 0; i < n; ++i) {
        const long double u = y[i] - mean;
        den += u * u;
        if (i + 1 < n) num += u * (y[i + 1] - mean);
    }
    if (den == 0.0L)
        throw std::invalid_argument("estimate_phi: zero variance after differencing");
    return std::clamp(static_cast<double>(num / den), -0.999, 0.999);
}

/// Long-memory description of a series: d from DFA of the single-line
/// residuals, phi from the lag-1 autocorrelation after Grunwald-Letnikov
/// differencing by that d, sigma2 from the residual variance.
struct MemoryParams {
    double d = 0.0;
    double phi = 0.0;
    double sigma2 = 0.0;
    std::string notes;
};

inline std::vector<double> single_fit_residuals(const AnnualSeries& s) {
    const LinearFit f = fit_single(s);
    std::vector<double> r(s.values.size());
    for (int t = 1; t <= s.n(); ++t) r[t - 1] = s.values[t - 1] - f.predict(t);
    return r;
}

inline MemoryParams estimate_memory_params(const AnnualSeries& s) {
    const auto resid = single_fit_residuals(s);
    const DfaResult dfa = dfa_estimate(resid);
    MemoryParams p;
    p.d = std::clamp(dfa.d, -0.49, 0.49);
    p.phi = estimate_phi(resid, std::clamp(p.d, 0.0, 1.0));
    long double ss = 0.0L;
    for (double v : resid) ss += static_cast<long double>(v) * v;
    p.sigma2 = static_cast<double>(ss / (s.n() - 2));
    p.notes = "d: order-1 DFA on single-fit residuals, scales [" +
              std::to_string(dfa.scales.front()) + "," +
              std::to_string(dfa.scales.back()) + "]; phi: lag-1 autocorr after "
              "GL differencing by max(d,0); sigma2: residual variance (rss/(n-2))";
    return p;
}

struct TrendWindow {
    double center_year = 0.0;
    int window_length = 0;
    double slope = 0.0;      // unit/year
    double sigma_mhat = 0.0; // sqrt of trend_variance for this window
};

/// Slopes on every full moving window (stride 1) with asymptotic error
/// bars from trend_variance; noise variance comes from each window's own
/// residuals, correlation parameters from the supplied MemoryParams.
inline std::vector<TrendWindow> moving_window_trends(const AnnualSeries& s,
                                                     int window_length,
                                                     const MemoryParams& params) {
    const int n = s.n();
    if (window_length < 3)
        throw std::invalid_argument("moving_window_trends: window_length >= 3");
    if (window_length > n)
        throw std::invalid_argument("moving_window_trends: window longer than series");

    std::vector<TrendWindow> out;
    out.reserve(n - window_length + 1);
    for (int w0 = 0; w0 + window_length <= n; ++w0) {
        AnnualSeries win;
        win.start_year = s.start_year + w0;
        win.values.assign(s.values.begin() + w0,
                          s.values.begin() + w0 + window_length);
        const LinearFit f = fit_single(win);
        const double sigma2_w = f.rss / (window_length - 2);
        TrendWindow tw;
        tw.center_year = s.start_year + w0 + (window_length - 1) / 2.0;
        tw.window_length = window_length;
        tw.slope = f.slope;
        tw.sigma_mhat =
            std::sqrt(trend_variance(sigma2_w, params.phi, params.d, window_length));
        out.push_back(tw);
    }
    return out;
}

/// Convenience overload: estimates MemoryParams from the full series first
/// (requires n >= 64 for the DFA step).
inline std::vector<TrendWindow> moving_window_trends(const AnnualSeries& s,
                                                     int window_length) {
    return moving_window_trends(s, window_length, estimate_memory_params(s));
}

} // namespace trendbreak
