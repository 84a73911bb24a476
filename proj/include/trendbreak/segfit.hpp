#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "trendbreak/series.hpp"

namespace trendbreak {

/// Ordinary least-squares line x ~ slope * t + intercept over t = 1..n.
struct LinearFit {
    double slope = 0.0;
    double intercept = 0.0; // value at t = 0
    double rss = 0.0;
    double rmse = 0.0;
    int n = 0;

    double predict(int t) const { return slope * t + intercept; }
};

/// Two line segments constrained to meet at the change index T:
/// prediction is a1*t + b1 for t <= T and a2*(t - T) + b2 for t > T,
/// with b2 = a1*T + b1 enforced exactly by construction.
struct DualFit {
    int change_index = 0; // T, in 1..n
    int change_year = 0;  // start_year + T - 1
    double a1 = 0.0, b1 = 0.0;
    double a2 = 0.0, b2 = 0.0;
    double rss = 0.0;
    double rmse = 0.0;
    int n = 0;

    double predict(int t) const {
        return t <= change_index ? a1 * t + b1
                                 : a2 * (t - change_index) + b2;
    }
    double slope_gap() const { return std::abs(a1 - a2); }
};

namespace detail {

/// Prefix sums of x_t and t*x_t in extended precision; shared by the
/// closed-form fit and the scan so each candidate T costs O(1) for the
/// coefficients (the residual pass stays O(n)).
struct PrefixSums {
    std::vector<long double> px;  // px[t]  = sum_{u<=t} x_u
    std::vector<long double> ptx; // ptx[t] = sum_{u<=t} u*x_u

    explicit PrefixSums(const std::vector<double>& x) {
        const std::size_t n = x.size();
        px.resize(n + 1);
        ptx.resize(n + 1);
        px[0] = ptx[0] = 0.0L;
        for (std::size_t t = 1; t <= n; ++t) {
            px[t] = px[t - 1] + x[t - 1];
            ptx[t] = ptx[t - 1] + static_cast<long double>(t) * x[t - 1];
        }
    }

    int n() const { return static_cast<int>(px.size()) - 1; }

    // X1 = sum_{t<=T} x_t, XT1 = sum_{t<=T} t x_t,
    // X2 = sum_{t'=1..n-T} x_{T+t'}, XT2 = sum t' x_{T+t'}
    struct Segment {
        long double x1, xt1, x2, xt2;
    };
    Segment segment_sums(int T) const {
        const int N = n();
        Segment s{};
        s.x1 = px[T];
        s.xt1 = ptx[T];
        s.x2 = px[N] - px[T];
        s.xt2 = (ptx[N] - ptx[T]) - static_cast<long double>(T) * s.x2;
        return s;
    }
};

struct DualCoeffs {
    long double a1, b1, a2, b2, lambda_tilde;
};

/// Closed-form stationary point of the constrained least-squares problem,
/// obtained by symbolic elimination of the 5-equation system in
/// (a1, b1, a2, b2, lambda~). All denominators are strictly positive for
/// 2 <= T <= n-2.
inline DualCoeffs dual_coeffs(int n, int T, const PrefixSums::Segment& s) {
    const long double N = n;
    const long double Tl = T;
    const long double X1 = s.x1, XT1 = s.xt1, X2 = s.x2, XT2 = s.xt2;

    const long double M = N - Tl;
    const long double D = 2.0L * N * Tl - N - 2.0L * Tl * Tl + 2.0L * Tl + 1.0L;
    const long double W = 2.0L * M + 1.0L; // 2N - 2T + 1

    DualCoeffs c{};
    c.a1 = (-6.0L * Tl * (N * N + N - Tl * Tl + 1.0L) * X1
            + 6.0L * (N * N + 2.0L * N * Tl - N - 3.0L * Tl * Tl + 3.0L * Tl) * XT1
            + 6.0L * Tl * (Tl - 1.0L) * W * X2
            - 18.0L * Tl * (Tl - 1.0L) * XT2)
           / (N * Tl * (Tl - 1.0L) * D);
    c.b1 = (2.0L * (3.0L * N * N * Tl - 2.0L * N * Tl * Tl + 3.0L * N * Tl + 2.0L * N
                    - Tl * Tl * Tl - Tl * Tl + Tl + 1.0L) * X1
            - 6.0L * (N * N + N - Tl * Tl + 1.0L) * XT1
            - 2.0L * (Tl - 1.0L) * (Tl + 1.0L) * W * X2
            + 6.0L * (Tl - 1.0L) * (Tl + 1.0L) * XT2)
           / (N * (Tl - 1.0L) * D);
    c.a2 = (6.0L * M * (Tl + 1.0L) * (M + 1.0L) * X1
            - 18.0L * M * (M + 1.0L) * XT1
            - 6.0L * M * (2.0L * Tl - 1.0L) * (M + 1.0L) * X2
            + 6.0L * (4.0L * N * Tl - 2.0L * N - 3.0L * Tl * Tl + 3.0L * Tl) * XT2)
           / (N * M * (M + 1.0L) * D);
    // continuity constraint, exact by construction
    c.b2 = c.a1 * Tl + c.b1;
    c.lambda_tilde = (M * (Tl + 1.0L) * (M - 1.0L) * X1
                      - 3.0L * M * (M - 1.0L) * XT1
                      + Tl * (Tl + 1.0L) * W * X2
                      - 3.0L * Tl * (Tl + 1.0L) * XT2)
                     / (N * D);
    return c;
}

/// Residual sum of squares of the piecewise prediction over all n points.
inline long double dual_rss(const std::vector<double>& x, int T, const DualCoeffs& c) {
    long double rss = 0.0L;
    const int n = static_cast<int>(x.size());
    for (int t = 1; t <= T; ++t) {
        const long double r = x[t - 1] - (c.a1 * t + c.b1);
        rss += r * r;
    }
    for (int t = T + 1; t <= n; ++t) {
        const long double r = x[t - 1] - (c.a2 * (t - T) + c.b2);
        rss += r * r;
    }
    return rss;
}

inline DualFit make_dual_fit(const AnnualSeries& series, int T, const DualCoeffs& c) {
    DualFit f;
    f.change_index = T;
    f.change_year = series.year_of(T);
    f.a1 = static_cast<double>(c.a1);
    f.b1 = static_cast<double>(c.b1);
    f.a2 = static_cast<double>(c.a2);
    f.b2 = static_cast<double>(c.b2);
    f.n = series.n();
    f.rss = static_cast<double>(dual_rss(series.values, T, c));
    f.rmse = std::sqrt(f.rss / f.n);
    return f;
}

inline void check_dual_preconditions(const AnnualSeries& series, int T) {
    const int n = series.n();
    if (n < 4)
        throw std::invalid_argument("dual fit needs at least 4 points, got " +
                                    std::to_string(n));
    if (T < 2 || T > n - 2)
        throw std::domain_error("change index T=" + std::to_string(T) +
                                " outside [2, " + std::to_string(n - 2) + "]");
}

} // namespace detail

/// OLS line over t = 1..n.
inline LinearFit fit_single(const AnnualSeries& series) {
    const int n = series.n();
    if (n < 2)
        throw std::invalid_argument("fit_single needs at least 2 points, got " +
                                    std::to_string(n));
    const long double tbar = (n + 1) / 2.0L;
    long double xbar = 0.0L;
    for (double v : series.values) xbar += v;
    xbar /= n;

    long double stx = 0.0L, stt = 0.0L;
    for (int t = 1; t <= n; ++t) {
        const long double dt = t - tbar;
        stx += dt * (series.values[t - 1] - xbar);
        stt += dt * dt;
    }
    LinearFit f;
    f.n = n;
    f.slope = static_cast<double>(stx / stt);
    f.intercept = static_cast<double>(xbar - (stx / stt) * tbar);
    long double rss = 0.0L;
    for (int t = 1; t <= n; ++t) {
        const long double r = series.values[t - 1] - (f.slope * t + f.intercept);
        rss += r * r;
    }
    f.rss = static_cast<double>(rss);
    f.rmse = std::sqrt(f.rss / n);
    return f;
}

/// Constrained two-segment least squares at a fixed change index T
/// (2 <= T <= n-2). The first segment owns the point t = T.
inline DualFit fit_dual_at(const AnnualSeries& series, int T) {
    detail::check_dual_preconditions(series, T);
    const detail::PrefixSums ps(series.values);
    const auto c = detail::dual_coeffs(series.n(), T, ps.segment_sums(T));
    return detail::make_dual_fit(series, T, c);
}

/// fit_dual_at plus the Lagrange-multiplier value of the stationarity
/// system; used when the multiplier itself is of interest.
struct ConstraintSolve {
    DualFit fit;
    double lambda_tilde = 0.0;
};

/// Reference solver: sets up the full 5-equation stationarity system in
/// (a1, b1, a2, b2, lambda~) and solves it by Gaussian elimination with
/// partial pivoting. Exists to cross-validate the closed forms; identical
/// contract to fit_dual_at.
inline ConstraintSolve solve_constraint_system(const AnnualSeries& series, int T) {
    detail::check_dual_preconditions(series, T);
    const int n = series.n();
    const detail::PrefixSums ps(series.values);
    const auto s = ps.segment_sums(T);

    const long double Tl = T;
    const long double M = n - Tl;
    const long double S1 = Tl * (Tl + 1.0L) / 2.0L;
    const long double Q1 = Tl * (Tl + 1.0L) * (2.0L * Tl + 1.0L) / 6.0L;
    const long double S2 = M * (M + 1.0L) / 2.0L;
    const long double Q2 = M * (M + 1.0L) * (2.0L * M + 1.0L) / 6.0L;

    // unknown order: a1, b1, a2, b2, lambda~
    std::array<std::array<long double, 6>, 5> m{};
    m[0] = {Q1, S1, 0.0L, 0.0L, -Tl, s.xt1};
    m[1] = {S1, Tl, 0.0L, 0.0L, -1.0L, s.x1};
    m[2] = {0.0L, 0.0L, Q2, S2, 0.0L, s.xt2};
    m[3] = {0.0L, 0.0L, S2, M, 1.0L, s.x2};
    m[4] = {Tl, 1.0L, 0.0L, -1.0L, 0.0L, 0.0L};

    for (int col = 0; col < 5; ++col) {
        int piv = col;
        for (int r = col + 1; r < 5; ++r)
            if (std::abs(static_cast<double>(m[r][col])) >
                std::abs(static_cast<double>(m[piv][col])))
                piv = r;
        if (m[piv][col] == 0.0L)
            throw std::runtime_error("constraint system singular at T=" +
                                     std::to_string(T));
        std::swap(m[col], m[piv]);
        for (int r = 0; r < 5; ++r) {
            if (r == col) continue;
            const long double f = m[r][col] / m[col][col];
            for (int c2 = col; c2 < 6; ++c2) m[r][c2] -= f * m[col][c2];
        }
    }
    detail::DualCoeffs c{};
    c.a1 = m[0][5] / m[0][0];
    c.b1 = m[1][5] / m[1][1];
    c.a2 = m[2][5] / m[2][2];
    c.b2 = m[3][5] / m[3][3];
    c.lambda_tilde = m[4][5] / m[4][4];

    ConstraintSolve out;
    out.fit = detail::make_dual_fit(series, T, c);
    out.lambda_tilde = static_cast<double>(c.lambda_tilde);
    return out;
}

} // namespace trendbreak
