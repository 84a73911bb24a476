#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "trendbreak/memory.hpp"
#include "trendbreak/rng.hpp"
#include "trendbreak/stochastic.hpp"

using namespace trendbreak;

TEST_CASE("gamma matches known values and the long-double library route",
          "[memory]") {
    CHECK(gamma_function(5.0) == Catch::Approx(24.0).epsilon(1e-12));
    CHECK(gamma_function(0.5) ==
          Catch::Approx(1.7724538509055160273).epsilon(1e-12));
    CHECK(gamma_function(1.0) == Catch::Approx(1.0).epsilon(1e-12));
    for (double x = 0.05; x <= 10.0; x += 0.173) {
        const double ref = static_cast<double>(std::tgammal(static_cast<long double>(x)));
        CHECK(gamma_function(x) == Catch::Approx(ref).epsilon(1e-12));
    }
    // reflection branch
    CHECK(gamma_function(-0.5) ==
          Catch::Approx(static_cast<double>(std::tgammal(-0.5L))).epsilon(1e-12));
}

TEST_CASE("gamma rejects its poles", "[memory]") {
    CHECK_THROWS_AS(gamma_function(0.0), std::domain_error);
    CHECK_THROWS_AS(gamma_function(-3.0), std::domain_error);
}

namespace {

// brute-force long-double reference for 2F1(1, d; 1-d; phi)
double hyp2f1_oracle(double d, double phi, long terms = 50000) {
    long double sum = 1.0L, term = 1.0L;
    for (long n = 0; n < terms; ++n) {
        term *= static_cast<long double>(phi) * (d + n) / (1.0L - d + n);
        sum += term;
    }
    return static_cast<double>(sum);
}

} // namespace

TEST_CASE("hypergeometric series agrees with a brute-force oracle", "[memory]") {
    CHECK(hyp2f1_1d(0.0, 0.5) == Catch::Approx(1.0).epsilon(1e-14));
    CHECK(hyp2f1_1d(0.0, -0.9) == Catch::Approx(1.0).epsilon(1e-14));
    CHECK(hyp2f1_1d(0.29, 0.87) ==
          Catch::Approx(2.506668932570683988).epsilon(1e-10));
    for (double d : {-0.4, -0.15, 0.1, 0.29, 0.45})
        for (double phi : {-0.9, -0.5, 0.0, 0.6, 0.87, 0.95})
            CHECK(hyp2f1_1d(d, phi) == Catch::Approx(hyp2f1_oracle(d, phi)).epsilon(1e-10));
}

TEST_CASE("hypergeometric series rejects |phi| >= 1", "[memory]") {
    CHECK_THROWS_AS(hyp2f1_1d(0.2, 1.0), std::domain_error);
    CHECK_THROWS_AS(hyp2f1_1d(0.2, -1.2), std::domain_error);
}

TEST_CASE("trend variance prefactor has the white-noise limit 12", "[memory]") {
    CHECK(f_factor(0.0, 0.0) == Catch::Approx(12.0).epsilon(1e-10));
    // at d = 0 the prefactor reduces to 12 (1+phi)/(1-phi)
    for (double phi : {-0.8, -0.3, 0.0, 0.4, 0.87})
        CHECK(f_factor(phi, 0.0) ==
              Catch::Approx(12.0 * (1.0 + phi) / (1.0 - phi)).epsilon(1e-10));
}

TEST_CASE("prefactor is continuous across d = 0 and rises with phi", "[memory]") {
    for (double phi : {-0.5, 0.0, 0.5, 0.87}) {
        const double f0 = f_factor(phi, 0.0);
        CHECK(std::abs(f_factor(phi, 1e-6) - f0) / f0 < 1e-4);
        CHECK(std::abs(f_factor(phi, -1e-6) - f0) / f0 < 1e-4);
    }
    double prev = f_factor(0.0, 0.29);
    for (double phi = 0.05; phi <= 0.901; phi += 0.05) {
        const double cur = f_factor(phi, 0.29);
        CHECK(cur > prev);
        prev = cur;
    }
    CHECK(f_factor(0.87, 0.29) == Catch::Approx(13.6672210398905741).epsilon(1e-10));
}

TEST_CASE("prefactor rejects parameters off the stationary domain", "[memory]") {
    CHECK_THROWS_AS(f_factor(1.0, 0.2), std::domain_error);
    CHECK_THROWS_AS(f_factor(0.5, 0.5), std::domain_error);
}

TEST_CASE("trend variance is positive across the parameter lattice", "[memory]") {
    for (double d = -0.40; d <= 0.4501; d += 0.05)
        for (double phi = -0.90; phi <= 0.9501; phi += 0.05)
            CHECK(trend_variance(1.0, phi, d, 50) > 0.0);
}

TEST_CASE("trend variance follows the closed scaling law", "[memory]") {
    CHECK(trend_variance(1.0, 0.0, 0.0, 100) == Catch::Approx(1.2e-5).epsilon(1e-10));
    const double v50 = trend_variance(2.0, 0.3, 0.0, 50);
    const double v100 = trend_variance(2.0, 0.3, 0.0, 100);
    CHECK(v50 / v100 == Catch::Approx(8.0).epsilon(1e-10));
    const double r = trend_variance(1.0, 0.1, 0.29, 20) / trend_variance(1.0, 0.1, 0.29, 10);
    CHECK(r == Catch::Approx(std::pow(2.0, 2.0 * 0.29 - 3.0)).epsilon(1e-10));
}

TEST_CASE("DFA sees H = 1/2 on white noise", "[memory][slow]") {
    long double acc = 0;
    const int members = 20;
    for (std::uint64_t k = 0; k < members; ++k)
        acc += dfa_estimate(gaussian_noise(2048, 1.0, 800 + k)).h;
    CHECK(static_cast<double>(acc / members) == Catch::Approx(0.5).margin(0.05));
}

TEST_CASE("DFA rejects inputs it cannot scale", "[memory]") {
    CHECK_THROWS_AS(dfa_estimate(gaussian_noise(32, 1.0, 1)), std::invalid_argument);
    DfaOptions opt;
    opt.scales = {4, 8};
    CHECK_THROWS_AS(dfa_estimate(gaussian_noise(256, 1.0, 1), opt),
                    std::invalid_argument);
    opt.scales = {4, 8, 16, 200};
    CHECK_THROWS_AS(dfa_estimate(gaussian_noise(256, 1.0, 1), opt),
                    std::invalid_argument);
}

TEST_CASE("fractional differencing has exact integer-order limits", "[memory]") {
    const std::vector<double> x = {3.0, 5.0, 9.0, 4.0, 7.0};
    const auto id = gl_fractional_diff(x, 0.0);
    CHECK(id == x);
    const auto diff = gl_fractional_diff(x, 1.0);
    CHECK(diff[0] == 3.0);
    CHECK(diff[1] == 2.0);
    CHECK(diff[2] == 4.0);
    CHECK(diff[3] == -5.0);
    CHECK(diff[4] == 3.0);
    CHECK_THROWS_AS(gl_fractional_diff(x, 1.5), std::domain_error);
}

TEST_CASE("fractional differencing composes like a semigroup", "[memory]") {
    const auto x = gaussian_noise(200, 1.0, 4242);
    const auto twice = gl_fractional_diff(gl_fractional_diff(x, 0.3), 0.3);
    const auto once = gl_fractional_diff(x, 0.6);
    for (int t = 50; t < 200; ++t)
        CHECK(twice[t] == Catch::Approx(once[t]).margin(1e-6));
}

TEST_CASE("fractional-difference weights cancel at the known rate", "[memory]") {
    // applying the operator to a unit impulse exposes the weight sequence;
    // the partial sums decay like J^-d / Gamma(1-d)
    const auto partial_sum = [](int J, double d) {
        std::vector<double> impulse(J + 1, 0.0);
        impulse[0] = 1.0;
        const auto w = gl_fractional_diff(impulse, d);
        long double sum = 0;
        for (double v : w) sum += v;
        return static_cast<double>(sum);
    };
    const double s1000 = partial_sum(1000, 0.3);
    const double s4000 = partial_sum(4000, 0.3);
    CHECK(std::abs(s1000) < 0.15);
    CHECK(std::abs(s4000) < std::abs(s1000));
    const double expect = std::pow(1000.0, -0.3) / gamma_function(0.7);
    CHECK(s1000 == Catch::Approx(expect).epsilon(0.05));
}

TEST_CASE("phi estimate recovers an AR(1) coefficient", "[memory][slow]") {
    const double phi = 0.5;
    Rng rng(31415);
    std::vector<double> x(10000);
    double prev = 0.0;
    for (auto& v : x) {
        prev = phi * prev + rng.next_normal();
        v = prev;
    }
    CHECK(estimate_phi(x, 0.0) == Catch::Approx(0.5).margin(0.03));
}

TEST_CASE("phi estimate is near zero for white noise", "[memory]") {
    long double acc = 0;
    const int members = 20;
    for (std::uint64_t k = 0; k < members; ++k)
        acc += estimate_phi(gaussian_noise(1000, 1.0, 600 + k), 0.0);
    CHECK(std::abs(static_cast<double>(acc / members)) < 0.03);
}

TEST_CASE("phi estimate rejects degenerate input", "[memory]") {
    CHECK_THROWS_AS(estimate_phi(std::vector<double>(50, 2.0), 0.0),
                    std::invalid_argument);
    CHECK_THROWS_AS(estimate_phi(std::vector<double>(10, 0.0), 0.0),
                    std::invalid_argument);
}

TEST_CASE("moving windows on an exact line all report its slope", "[memory]") {
    AnnualSeries s;
    s.start_year = 1950;
    for (int t = 1; t <= 40; ++t) s.values.push_back(0.03 * t + 1.0);
    MemoryParams p;
    p.d = 0.0;
    p.phi = 0.0;
    p.sigma2 = 1.0;
    const auto windows = moving_window_trends(s, 10, p);
    REQUIRE(windows.size() == 31);
    for (const auto& w : windows) {
        CHECK(w.slope == Catch::Approx(0.03).margin(1e-10));
        CHECK(w.window_length == 10);
    }
    CHECK(windows.front().center_year == Catch::Approx(1950 + 4.5));
}

TEST_CASE("short-window error bars scale like the -3/2 power", "[memory][slow]") {
    AnnualSeries s;
    s.start_year = 1;
    s.values = gaussian_noise(512, 1.0, 2718);
    MemoryParams p;
    p.d = 0.0;
    p.phi = 0.0;
    p.sigma2 = 1.0;
    const auto w5 = moving_window_trends(s, 5, p);
    const auto w20 = moving_window_trends(s, 20, p);
    const auto mean_sig = [](const std::vector<TrendWindow>& v) {
        long double acc = 0;
        for (const auto& w : v) acc += w.sigma_mhat;
        return static_cast<double>(acc / v.size());
    };
    const double ratio = mean_sig(w5) / mean_sig(w20);
    CHECK(ratio > 6.0);
    CHECK(ratio < 10.0);
}

TEST_CASE("moving windows reject bad window lengths", "[memory]") {
    AnnualSeries s;
    s.start_year = 1;
    s.values = gaussian_noise(30, 1.0, 5);
    MemoryParams p;
    CHECK_THROWS_AS(moving_window_trends(s, 31, p), std::invalid_argument);
    CHECK_THROWS_AS(moving_window_trends(s, 2, p), std::invalid_argument);
}

TEST_CASE("memory parameters estimated from a long-memory series are sane",
          "[memory][slow]") {
    AnnualSeries s;
    s.start_year = 1900;
    s.values = arfima_noise(1024, 0.2, 0.5, 5150);
    const MemoryParams p = estimate_memory_params(s);
    CHECK(p.d > -0.1);
    CHECK(p.d < 0.45);
    CHECK(p.sigma2 > 0.0);
    CHECK(std::abs(p.phi) < 0.999);
    CHECK_FALSE(p.notes.empty());
}
