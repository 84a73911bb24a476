#pragma once

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "trendbreak/scan.hpp"
#include "trendbreak/segfit.hpp"
#include "trendbreak/series.hpp"

namespace trendbreak {

struct Criteria {
    double aic = 0.0;
    double bic = 0.0;
};

/// AIC = n ln(rss/n) + 2k (additive constant taken as zero) and
/// BIC = n ln(rss/n) + k ln(n), natural logarithms. A perfect fit
/// (rss = 0) maps to -infinity so it wins any comparison.
inline Criteria information_criteria(double rss, int n, int k) {
    if (rss < 0.0) throw std::domain_error("negative rss");
    if (n < 1 || k < 1) throw std::domain_error("information_criteria: n, k >= 1");
    if (rss == 0.0) {
        const double inf = std::numeric_limits<double>::infinity();
        return {-inf, -inf};
    }
    const double core = n * std::log(rss / n);
    return {core + 2.0 * k, core + k * std::log(static_cast<double>(n))};
}

enum class Model { single, dual };

inline const char* to_string(Model m) { return m == Model::single ? "single" : "dual"; }

struct ModelSelection {
    static constexpr int k_single = 2;
    static constexpr int k_dual = 4;

    double aic_single = 0.0, aic_dual = 0.0;
    double bic_single = 0.0, bic_dual = 0.0;
    double delta_bic = 0.0; // bic_dual - bic_single; dual preferred iff < 0
    Model preferred = Model::single;
};

/// Compare the single-line and best dual fits of a series by information
/// criteria. Selection uses BIC only; AIC is reported alongside.
inline ModelSelection select_model(const AnnualSeries& series,
                                   const ScanResult& scan) {
    const int n = series.n();
    const LinearFit single = fit_single(series);
    const auto cs = information_criteria(single.rss, n, ModelSelection::k_single);
    const auto cd = information_criteria(scan.best.rss, n, ModelSelection::k_dual);

    ModelSelection sel;
    sel.aic_single = cs.aic;
    sel.aic_dual = cd.aic;
    sel.bic_single = cs.bic;
    sel.bic_dual = cd.bic;
    if (std::isinf(cs.bic) && std::isinf(cd.bic)) {
        // both fits perfect: the simpler model wins, difference defined as 0
        sel.delta_bic = 0.0;
        sel.preferred = Model::single;
    } else {
        sel.delta_bic = cd.bic - cs.bic;
        sel.preferred = sel.delta_bic < 0.0 ? Model::dual : Model::single;
    }
    return sel;
}

} // namespace trendbreak
