#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace trendbreak {

/// A contiguous run of annual values. The time index t used by all fits
/// runs 1..n with t = 1 corresponding to start_year, so the calendar year
/// of index t is start_year + t - 1.
struct AnnualSeries {
    int start_year = 0;
    std::vector<double> values;

    int n() const { return static_cast<int>(values.size()); }
    int year_of(int t) const { return start_year + t - 1; }
    int index_of(int year) const { return year - start_year + 1; }
    int last_year() const { return start_year + n() - 1; }
};

/// Completeness/finiteness check used at ingestion boundaries.
inline void validate_series(const AnnualSeries& s, int min_len = 3) {
    if (s.n() < min_len)
        throw std::invalid_argument("series too short: n=" + std::to_string(s.n()) +
                                    " < " + std::to_string(min_len));
    for (double v : s.values)
        if (!std::isfinite(v))
            throw std::invalid_argument("series contains non-finite value");
}

} // namespace trendbreak
