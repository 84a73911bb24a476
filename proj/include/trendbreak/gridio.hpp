#pragma once

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <optional>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "trendbreak/parallel.hpp"
#include "trendbreak/scan.hpp"
#include "trendbreak/selection.hpp"
#include "trendbreak/series.hpp"
#include "trendbreak/sigtest.hpp"
#include "trendbreak/textio.hpp"

namespace trendbreak {

enum class CellState : std::uint8_t {
    valid = 0,        // complete series present
    no_data,          // cell never seen in the input
    incomplete_years, // at least one year missing or non-finite
};

inline const char* to_string(CellState s) {
    switch (s) {
        case CellState::valid: return "valid";
        case CellState::no_data: return "no_data";
        default: return "incomplete_years";
    }
}

/// Gridded annual temperature values, lat-major storage; missing values
/// are NaN. Only cells with a complete, finite series are marked valid.
struct GridDataset {
    std::vector<double> lats; // ascending, degrees
    std::vector<double> lons; // ascending, degrees
    int start_year = 0;
    int n_years = 0;
    std::vector<std::uint8_t> land;  // per cell, lat-major
    std::vector<CellState> state;    // per cell
    std::vector<double> values;      // [lat][lon][year]

    int n_lat() const { return static_cast<int>(lats.size()); }
    int n_lon() const { return static_cast<int>(lons.size()); }
    int n_cells() const { return n_lat() * n_lon(); }
    int cell(int ilat, int ilon) const { return ilat * n_lon() + ilon; }

    const double* cell_values(int c) const { return values.data() + static_cast<std::size_t>(c) * n_years; }
    double* cell_values(int c) { return values.data() + static_cast<std::size_t>(c) * n_years; }

    AnnualSeries cell_series(int c) const {
        AnnualSeries s;
        s.start_year = start_year;
        s.values.assign(cell_values(c), cell_values(c) + n_years);
        return s;
    }

    /// Recompute per-cell validity from the stored values.
    void refresh_state() {
        state.assign(n_cells(), CellState::valid);
        for (int c = 0; c < n_cells(); ++c) {
            const double* v = cell_values(c);
            bool any = false, complete = true;
            for (int y = 0; y < n_years; ++y) {
                if (std::isfinite(v[y])) any = true;
                else complete = false;
            }
            state[c] = complete ? CellState::valid
                                : (any ? CellState::incomplete_years : CellState::no_data);
        }
    }
};

struct IngestReport {
    int total_cells = 0;
    int valid_cells = 0;
    int invalid_cells = 0;
    int land_cells = 0;       // land AND valid
    std::map<std::string, int> invalid_reasons;
};

inline IngestReport make_ingest_report(const GridDataset& g) {
    IngestReport r;
    r.total_cells = g.n_cells();
    for (int c = 0; c < g.n_cells(); ++c) {
        if (g.state[c] == CellState::valid) {
            ++r.valid_cells;
            if (g.land[c]) ++r.land_cells;
        } else {
            ++r.invalid_cells;
            ++r.invalid_reasons[to_string(g.state[c])];
        }
    }
    return r;
}

namespace detail {

// little-endian binary helpers
inline void put_u32(std::string& s, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) s.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
inline void put_u64(std::string& s, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) s.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
inline void put_f64(std::string& s, double v) { put_u64(s, std::bit_cast<std::uint64_t>(v)); }

struct ByteReader {
    const std::string& data;
    std::size_t pos = 0;

    void need(std::size_t n) const {
        if (pos + n > data.size()) throw std::runtime_error("binary grid truncated");
    }
    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i)
            v |= static_cast<std::uint32_t>(static_cast<unsigned char>(data[pos + i])) << (8 * i);
        pos += 4;
        return v;
    }
    std::uint64_t u64() {
        need(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i)
            v |= static_cast<std::uint64_t>(static_cast<unsigned char>(data[pos + i])) << (8 * i);
        pos += 8;
        return v;
    }
    double f64() { return std::bit_cast<double>(u64()); }
    std::uint8_t u8() {
        need(1);
        return static_cast<std::uint8_t>(data[pos++]);
    }
};

constexpr char kGridMagic[8] = {'T', 'B', 'G', 'R', 'I', 'D', '1', '\0'};

} // namespace detail

enum class GridFormat { autodetect, csv, binary };

/// Parse the documented grid CSV (header lat,lon,land,year,value; one row
/// per cell-year). Throws with a line number on malformed rows and on
/// structurally inconsistent input (duplicate rows, contradictory land flags).
inline GridDataset load_grid_csv(const std::string& text) {
    struct RawCell {
        std::map<int, double> by_year;
        int land = -1;
    };
    std::map<std::pair<double, double>, RawCell> cells;
    int min_year = std::numeric_limits<int>::max();
    int max_year = std::numeric_limits<int>::min();

    bool header_seen = false;
    detail::for_each_line(text, [&](int line_no, std::string_view line) {
        if (line.empty()) return;
        if (!header_seen) {
            if (line != "lat,lon,land,year,value")
                throw std::runtime_error("line 1: expected header lat,lon,land,year,value");
            header_seen = true;
            return;
        }
        const auto f = detail::split_csv(line);
        if (f.size() != 5)
            throw std::runtime_error("parse error at line " + std::to_string(line_no) +
                                     ": expected 5 fields, got " + std::to_string(f.size()));
        const double lat = detail::parse_double(f[0], line_no);
        const double lon = detail::parse_double(f[1], line_no);
        const long land = detail::parse_int(f[2], line_no);
        const long year = detail::parse_int(f[3], line_no);
        const double value = detail::parse_double(f[4], line_no);
        if (!(lat >= -90.0 && lat <= 90.0))
            throw std::runtime_error("line " + std::to_string(line_no) +
                                     ": latitude out of range");
        if (land != 0 && land != 1)
            throw std::runtime_error("line " + std::to_string(line_no) +
                                     ": land flag must be 0 or 1");
        auto& cell = cells[{lat, lon}];
        if (cell.land >= 0 && cell.land != land)
            throw std::runtime_error("line " + std::to_string(line_no) +
                                     ": contradictory land flag for cell");
        cell.land = static_cast<int>(land);
        if (!cell.by_year.emplace(static_cast<int>(year), value).second)
            throw std::runtime_error("line " + std::to_string(line_no) +
                                     ": duplicate cell-year row");
        min_year = std::min(min_year, static_cast<int>(year));
        max_year = std::max(max_year, static_cast<int>(year));
    });
    if (cells.empty()) throw std::runtime_error("grid csv holds no data rows");

    GridDataset g;
    g.start_year = min_year;
    g.n_years = max_year - min_year + 1;
    {
        std::vector<double> lat_set, lon_set;
        for (const auto& [key, cell] : cells) {
            lat_set.push_back(key.first);
            lon_set.push_back(key.second);
        }
        std::sort(lat_set.begin(), lat_set.end());
        lat_set.erase(std::unique(lat_set.begin(), lat_set.end()), lat_set.end());
        std::sort(lon_set.begin(), lon_set.end());
        lon_set.erase(std::unique(lon_set.begin(), lon_set.end()), lon_set.end());
        g.lats = std::move(lat_set);
        g.lons = std::move(lon_set);
    }
    g.land.assign(g.n_cells(), 0);
    g.values.assign(static_cast<std::size_t>(g.n_cells()) * g.n_years,
                    std::numeric_limits<double>::quiet_NaN());
    for (const auto& [key, cell] : cells) {
        const auto ilat = static_cast<int>(
            std::lower_bound(g.lats.begin(), g.lats.end(), key.first) - g.lats.begin());
        const auto ilon = static_cast<int>(
            std::lower_bound(g.lons.begin(), g.lons.end(), key.second) - g.lons.begin());
        const int c = g.cell(ilat, ilon);
        g.land[c] = static_cast<std::uint8_t>(cell.land);
        for (const auto& [year, value] : cell.by_year)
            g.cell_values(c)[year - g.start_year] = value;
    }
    g.refresh_state();
    return g;
}

inline GridDataset load_grid_binary(const std::string& bytes) {
    if (bytes.size() < 8 || std::memcmp(bytes.data(), detail::kGridMagic, 8) != 0)
        throw std::runtime_error("binary grid: bad magic");
    detail::ByteReader r{bytes, 8};
    GridDataset g;
    const std::uint32_t n_lat = r.u32();
    const std::uint32_t n_lon = r.u32();
    const std::uint32_t n_years = r.u32();
    g.start_year = static_cast<std::int32_t>(r.u32());
    if (n_lat == 0 || n_lon == 0 || n_years == 0)
        throw std::runtime_error("binary grid: empty dimensions");
    g.n_years = static_cast<int>(n_years);
    g.lats.resize(n_lat);
    for (auto& v : g.lats) v = r.f64();
    g.lons.resize(n_lon);
    for (auto& v : g.lons) v = r.f64();
    g.land.resize(static_cast<std::size_t>(n_lat) * n_lon);
    for (auto& v : g.land) v = r.u8();
    g.values.resize(static_cast<std::size_t>(n_lat) * n_lon * n_years);
    for (auto& v : g.values) v = r.f64();
    g.refresh_state();
    return g;
}

inline GridDataset load_grid(const std::string& path,
                             GridFormat format = GridFormat::autodetect) {
    const std::string bytes = detail::read_file(path);
    if (format == GridFormat::autodetect)
        format = (bytes.size() >= 8 && std::memcmp(bytes.data(), detail::kGridMagic, 8) == 0)
                     ? GridFormat::binary
                     : GridFormat::csv;
    return format == GridFormat::binary ? load_grid_binary(bytes) : load_grid_csv(bytes);
}

inline std::string grid_to_csv(const GridDataset& g) {
    std::string out = "lat,lon,land,year,value\n";
    for (int ilat = 0; ilat < g.n_lat(); ++ilat)
        for (int ilon = 0; ilon < g.n_lon(); ++ilon) {
            const int c = g.cell(ilat, ilon);
            const double* v = g.cell_values(c);
            for (int y = 0; y < g.n_years; ++y) {
                if (!std::isfinite(v[y])) continue; // missing year: row absent
                out += detail::fmt_double(g.lats[ilat]);
                out += ',';
                out += detail::fmt_double(g.lons[ilon]);
                out += ',';
                out += g.land[c] ? '1' : '0';
                out += ',';
                out += std::to_string(g.start_year + y);
                out += ',';
                out += detail::fmt_double(v[y]);
                out += '\n';
            }
        }
    return out;
}

inline std::string grid_to_binary(const GridDataset& g) {
    std::string out(detail::kGridMagic, 8);
    detail::put_u32(out, static_cast<std::uint32_t>(g.n_lat()));
    detail::put_u32(out, static_cast<std::uint32_t>(g.n_lon()));
    detail::put_u32(out, static_cast<std::uint32_t>(g.n_years));
    detail::put_u32(out, static_cast<std::uint32_t>(g.start_year));
    for (double v : g.lats) detail::put_f64(out, v);
    for (double v : g.lons) detail::put_f64(out, v);
    for (auto m : g.land) out.push_back(static_cast<char>(m));
    for (double v : g.values) detail::put_f64(out, v);
    return out;
}

/// Annual mean of one calendar year of daily values; non-finite entries
/// count as absent days. Returns nothing when fewer than min_days remain.
inline std::optional<double> daily_to_annual(std::span<const double> daily,
                                             int min_days = 300) {
    long double sum = 0.0L;
    int count = 0;
    for (double v : daily) {
        if (!std::isfinite(v)) continue;
        sum += v;
        ++count;
    }
    if (count < min_days) return std::nullopt;
    return static_cast<double>(sum / count);
}

/// cos(latitude) area weights, clamped at zero.
inline std::vector<double> area_weights(const std::vector<double>& lats) {
    constexpr double deg = 3.14159265358979323846 / 180.0;
    std::vector<double> w(lats.size());
    for (std::size_t i = 0; i < lats.size(); ++i)
        w[i] = std::max(0.0, std::cos(lats[i] * deg));
    return w;
}

/// Latitude-weighted mean over valid land cells, renormalized each year
/// over the cells actually contributing.
inline AnnualSeries global_mean_series(const GridDataset& g) {
    const auto w = area_weights(g.lats);
    AnnualSeries out;
    out.start_year = g.start_year;
    out.values.assign(g.n_years, 0.0);
    std::vector<long double> wsum(g.n_years, 0.0L), vsum(g.n_years, 0.0L);
    for (int ilat = 0; ilat < g.n_lat(); ++ilat)
        for (int ilon = 0; ilon < g.n_lon(); ++ilon) {
            const int c = g.cell(ilat, ilon);
            if (!g.land[c] || g.state[c] != CellState::valid) continue;
            const double* v = g.cell_values(c);
            for (int y = 0; y < g.n_years; ++y) {
                vsum[y] += w[ilat] * v[y];
                wsum[y] += w[ilat];
            }
        }
    for (int y = 0; y < g.n_years; ++y) {
        if (wsum[y] <= 0.0L)
            throw std::runtime_error("global_mean_series: no valid land cells");
        out.values[y] = static_cast<double>(vsum[y] / wsum[y]);
    }
    return out;
}

struct BatchConfig {
    int margin = 10;
    double closeness_factor = 1.02;
    bool significance = false; // also run the Monte Carlo test per cell
    SigConfig sig;             // used when significance is on
    std::uint64_t seed = 0;    // per-cell surrogate seeds derive from this
    int workers = 1;
};

/// Per-cell analysis products for one land grid cell.
struct CellResult {
    double lat = 0.0, lon = 0.0;
    bool ok = false;
    std::string error;
    int change_year = 0;
    double a1 = 0.0, a2 = 0.0, b1 = 0.0, b2 = 0.0;
    double delta_bic = 0.0;
    Model preferred = Model::single;
    bool sig_tested = false;
    bool significant = false;
    double s_obs = 0.0;
    double rmse_single = 0.0, rmse_dual = 0.0;
    std::vector<ScanPoint> candidates;
};

/// Scan + model selection (+ optional significance test) on every valid
/// land cell, lat-major order. Results are deterministic for any worker
/// count: cell seeds derive from the flat cell index and each slot is
/// written independently.
inline std::vector<CellResult> batch_analyze(const GridDataset& g,
                                             const BatchConfig& cfg) {
    std::vector<int> cells;
    for (int c = 0; c < g.n_cells(); ++c)
        if (g.land[c] && g.state[c] == CellState::valid) cells.push_back(c);

    std::vector<CellResult> results(cells.size());
    parallel_for(static_cast<int>(cells.size()), cfg.workers, [&](int i) {
        const int c = cells[i];
        CellResult& r = results[i];
        r.lat = g.lats[c / g.n_lon()];
        r.lon = g.lons[c % g.n_lon()];
        try {
            const AnnualSeries s = g.cell_series(c);
            ScanOptions sopt;
            sopt.margin = cfg.margin;
            sopt.closeness_factor = cfg.closeness_factor;
            const ScanResult scan = scan_change_point(s, sopt);
            const ModelSelection sel = select_model(s, scan);
            const LinearFit single = fit_single(s);
            r.change_year = scan.best.change_year;
            r.a1 = scan.best.a1;
            r.a2 = scan.best.a2;
            r.b1 = scan.best.b1;
            r.b2 = scan.best.b2;
            r.delta_bic = sel.delta_bic;
            r.preferred = sel.preferred;
            r.rmse_single = single.rmse;
            r.rmse_dual = scan.best.rmse;
            r.candidates = scan.candidates;
            r.s_obs = scan.best.slope_gap();
            if (cfg.significance) {
                SigConfig sc = cfg.sig;
                sc.margin = cfg.margin;
                sc.workers = 1; // cell-level parallelism only
                sc.seed = derive_seed(cfg.seed, static_cast<std::uint64_t>(c));
                const SignificanceResult sig = test_change_point(s, scan, sc);
                r.sig_tested = true;
                r.significant = sig.reject;
            }
            r.ok = true;
        } catch (const std::exception& e) {
            r.ok = false;
            r.error = e.what();
        }
    });
    return results;
}

/// Results CSV, one row per analyzed cell. The candidates field packs the
/// relative-minima list as year:rmse pairs joined by ';'.
inline std::string results_to_csv(const std::vector<CellResult>& results) {
    std::string out =
        "lat,lon,change_year,a1,a2,b1,b2,delta_bic,preferred,significant,"
        "s_obs,rmse_single,rmse_dual,candidates\n";
    for (const auto& r : results) {
        out += detail::fmt_double(r.lat);
        out += ',';
        out += detail::fmt_double(r.lon);
        out += ',';
        if (!r.ok) {
            out += "error,,,,,,,,,,,";
            out += '\n';
            continue;
        }
        out += std::to_string(r.change_year);
        out += ',';
        out += detail::fmt_double(r.a1);
        out += ',';
        out += detail::fmt_double(r.a2);
        out += ',';
        out += detail::fmt_double(r.b1);
        out += ',';
        out += detail::fmt_double(r.b2);
        out += ',';
        out += detail::fmt_double(r.delta_bic);
        out += ',';
        out += to_string(r.preferred);
        out += ',';
        out += r.sig_tested ? (r.significant ? "1" : "0") : "na";
        out += ',';
        out += detail::fmt_double(r.s_obs);
        out += ',';
        out += detail::fmt_double(r.rmse_single);
        out += ',';
        out += detail::fmt_double(r.rmse_dual);
        out += ',';
        for (std::size_t i = 0; i < r.candidates.size(); ++i) {
            if (i) out += ';';
            out += std::to_string(r.candidates[i].change_year);
            out += ':';
            out += detail::fmt_double(r.candidates[i].rmse);
        }
        out += '\n';
    }
    return out;
}

/// Parse a results CSV written by results_to_csv (used by the map maker).
inline std::vector<CellResult> results_from_csv(const std::string& text) {
    std::vector<CellResult> out;
    bool header_seen = false;
    detail::for_each_line(text, [&](int line_no, std::string_view line) {
        if (line.empty()) return;
        if (!header_seen) {
            header_seen = true;
            return;
        }
        const auto f = detail::split_csv(line);
        if (f.size() != 14)
            throw std::runtime_error("results csv line " + std::to_string(line_no) +
                                     ": expected 14 fields");
        CellResult r;
        r.lat = detail::parse_double(f[0], line_no);
        r.lon = detail::parse_double(f[1], line_no);
        if (f[2] == "error") {
            r.ok = false;
            out.push_back(std::move(r));
            return;
        }
        r.ok = true;
        r.change_year = static_cast<int>(detail::parse_int(f[2], line_no));
        r.a1 = detail::parse_double(f[3], line_no);
        r.a2 = detail::parse_double(f[4], line_no);
        r.b1 = detail::parse_double(f[5], line_no);
        r.b2 = detail::parse_double(f[6], line_no);
        r.delta_bic = detail::parse_double(f[7], line_no);
        r.preferred = f[8] == "dual" ? Model::dual : Model::single;
        r.sig_tested = f[9] != "na";
        r.significant = f[9] == "1";
        r.s_obs = detail::parse_double(f[10], line_no);
        r.rmse_single = detail::parse_double(f[11], line_no);
        r.rmse_dual = detail::parse_double(f[12], line_no);
        if (!f[13].empty()) {
            std::string_view cand = f[13];
            std::size_t p = 0;
            while (p < cand.size()) {
                auto semi = cand.find(';', p);
                if (semi == std::string_view::npos) semi = cand.size();
                const auto item = cand.substr(p, semi - p);
                const auto colon = item.find(':');
                if (colon == std::string_view::npos)
                    throw std::runtime_error("results csv line " + std::to_string(line_no) +
                                             ": bad candidates field");
                ScanPoint sp;
                sp.change_year = static_cast<int>(detail::parse_int(item.substr(0, colon), line_no));
                sp.rmse = detail::parse_double(item.substr(colon + 1), line_no);
                r.candidates.push_back(sp);
                p = semi + 1;
            }
        }
        out.push_back(std::move(r));
    });
    return out;
}

/// Area-weighted summary of a batch: model-preference and significance
/// fractions plus the change-year distribution of dual-preferred cells.
struct AreaSummary {
    double dual_fraction = 0.0;
    double single_fraction = 0.0;
    double significant_fraction = 0.0; // over tested cells; 0 if none tested
    bool any_tested = false;
    std::map<int, int> change_year_histogram;        // dual-preferred cells
    std::map<int, double> change_year_cumulative;    // area-weighted CDF
};

inline AreaSummary summarize_area(const std::vector<CellResult>& results) {
    AreaSummary s;
    constexpr double deg = 3.14159265358979323846 / 180.0;
    long double w_all = 0.0L, w_dual = 0.0L, w_tested = 0.0L, w_sig = 0.0L;
    std::map<int, double> year_weight;
    for (const auto& r : results) {
        if (!r.ok) continue;
        const double w = std::max(0.0, std::cos(r.lat * deg));
        w_all += w;
        if (r.preferred == Model::dual) {
            w_dual += w;
            ++s.change_year_histogram[r.change_year];
            year_weight[r.change_year] += w;
        }
        if (r.sig_tested) {
            w_tested += w;
            if (r.significant) w_sig += w;
        }
    }
    if (w_all > 0.0L) {
        s.dual_fraction = static_cast<double>(w_dual / w_all);
        s.single_fraction = 1.0 - s.dual_fraction;
    }
    if (w_tested > 0.0L) {
        s.any_tested = true;
        s.significant_fraction = static_cast<double>(w_sig / w_tested);
    }
    long double acc = 0.0L;
    for (const auto& [year, w] : year_weight) {
        acc += w;
        s.change_year_cumulative[year] =
            static_cast<double>(acc / (w_dual > 0.0L ? w_dual : 1.0L));
    }
    return s;
}

} // namespace trendbreak
