#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "trendbreak/gridio.hpp"
#include "trendbreak/textio.hpp"

namespace trendbreak {

using Rgb = std::array<std::uint8_t, 3>;

struct Raster {
    int width = 0, height = 0;
    std::vector<Rgb> pixels; // row-major, row 0 at the top

    Rgb& at(int row, int col) { return pixels[static_cast<std::size_t>(row) * width + col]; }
    const Rgb& at(int row, int col) const {
        return pixels[static_cast<std::size_t>(row) * width + col];
    }
};

inline std::string raster_to_ppm(const Raster& r) {
    std::string out = "P6\n" + std::to_string(r.width) + " " +
                      std::to_string(r.height) + "\n255\n";
    out.reserve(out.size() + r.pixels.size() * 3);
    for (const auto& px : r.pixels) {
        out.push_back(static_cast<char>(px[0]));
        out.push_back(static_cast<char>(px[1]));
        out.push_back(static_cast<char>(px[2]));
    }
    return out;
}

inline constexpr Rgb kMaskGray{128, 128, 128};
inline constexpr Rgb kBackgroundWhite{255, 255, 255};

namespace detail {

inline Rgb lerp_rgb(const Rgb& a, const Rgb& b, double t) {
    Rgb out;
    for (int i = 0; i < 3; ++i)
        out[i] = static_cast<std::uint8_t>(
            std::lround(a[i] + (b[i] - static_cast<double>(a[i])) * t));
    return out;
}

template <std::size_t N>
inline Rgb ramp_lookup(const std::array<Rgb, N>& stops, double t) {
    t = std::clamp(t, 0.0, 1.0);
    const double x = t * (N - 1);
    const auto i = std::min(static_cast<std::size_t>(x), N - 2);
    return lerp_rgb(stops[i], stops[i + 1], x - i);
}

} // namespace detail

/// Sequential ramp for change years (dark violet -> orange -> yellow).
inline Rgb ramp_sequential(double t) {
    static constexpr std::array<Rgb, 5> stops = {{{13, 8, 135},
                                                  {126, 3, 168},
                                                  {204, 71, 120},
                                                  {248, 149, 64},
                                                  {240, 249, 33}}};
    return detail::ramp_lookup(stops, t);
}

/// Diverging blue-white-red ramp, for values symmetric about zero.
inline Rgb ramp_diverging(double t) {
    static constexpr std::array<Rgb, 3> stops = {{{33, 102, 172},
                                                  {247, 247, 247},
                                                  {178, 24, 43}}};
    return detail::ramp_lookup(stops, t);
}

enum class MapField { change_year, a1, a2, slope_diff, delta_bic };

inline const char* to_string(MapField f) {
    switch (f) {
        case MapField::change_year: return "change_year";
        case MapField::a1: return "a1";
        case MapField::a2: return "a2";
        case MapField::slope_diff: return "slope_diff";
        default: return "delta_bic";
    }
}

struct MapRender {
    Raster raster;
    double vmin = 0.0, vmax = 0.0;
    const char* ramp = "";
    bool masked = false; // gray mask applied to single-preference cells
};

/// Render one field of a batch-results list onto a lat/lon raster.
/// Pixel rows run north to south; cells without a result stay background
/// white. Change-year maps gray out cells preferring the single model;
/// value maps (slopes, delta BIC) plot every analyzed cell.
inline MapRender render_map(const std::vector<CellResult>& results, MapField field) {
    std::vector<double> lats, lons;
    for (const auto& r : results) {
        lats.push_back(r.lat);
        lons.push_back(r.lon);
    }
    std::sort(lats.begin(), lats.end());
    lats.erase(std::unique(lats.begin(), lats.end()), lats.end());
    std::sort(lons.begin(), lons.end());
    lons.erase(std::unique(lons.begin(), lons.end()), lons.end());
    if (lats.empty()) throw std::runtime_error("render_map: no results");

    const auto value_of = [field](const CellResult& r) {
        switch (field) {
            case MapField::change_year: return static_cast<double>(r.change_year);
            case MapField::a1: return r.a1;
            case MapField::a2: return r.a2;
            case MapField::slope_diff: return r.a2 - r.a1;
            default: return r.delta_bic;
        }
    };

    MapRender out;
    out.masked = field == MapField::change_year;
    // value range over the cells that will be colored
    bool any = false;
    double vmin = 0.0, vmax = 0.0;
    for (const auto& r : results) {
        if (!r.ok) continue;
        if (out.masked && r.preferred == Model::single) continue;
        const double v = value_of(r);
        if (!any) {
            vmin = vmax = v;
            any = true;
        } else {
            vmin = std::min(vmin, v);
            vmax = std::max(vmax, v);
        }
    }
    const bool diverging = field != MapField::change_year;
    if (diverging) {
        const double amp = std::max(std::abs(vmin), std::abs(vmax));
        vmin = -amp;
        vmax = amp;
    }
    out.vmin = vmin;
    out.vmax = vmax;
    out.ramp = diverging ? "diverging-blue-white-red" : "sequential-violet-yellow";

    Raster& img = out.raster;
    img.width = static_cast<int>(lons.size());
    img.height = static_cast<int>(lats.size());
    img.pixels.assign(static_cast<std::size_t>(img.width) * img.height,
                      kBackgroundWhite);

    const double span = vmax - vmin;
    for (const auto& r : results) {
        const auto ilat = static_cast<int>(
            std::lower_bound(lats.begin(), lats.end(), r.lat) - lats.begin());
        const auto ilon = static_cast<int>(
            std::lower_bound(lons.begin(), lons.end(), r.lon) - lons.begin());
        const int row = img.height - 1 - ilat; // north on top
        if (!r.ok) continue;
        if (out.masked && r.preferred == Model::single) {
            img.at(row, ilon) = kMaskGray;
            continue;
        }
        const double v = value_of(r);
        const double t = span > 0.0 ? (v - vmin) / span : 0.5;
        img.at(row, ilon) = diverging ? ramp_diverging(t) : ramp_sequential(t);
    }
    return out;
}

} // namespace trendbreak
