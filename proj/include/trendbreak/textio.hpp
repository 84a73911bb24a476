#pragma once

#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "trendbreak/series.hpp"

namespace trendbreak {
namespace detail {

/// Shortest round-trip decimal rendering of a double.
inline std::string fmt_double(double v) {
    if (std::isnan(v)) return "nan";
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

inline double parse_double(std::string_view sv, int line) {
    double v{};
    const auto res = std::from_chars(sv.data(), sv.data() + sv.size(), v);
    if (res.ec != std::errc() || res.ptr != sv.data() + sv.size()) {
        if (sv == "nan" || sv == "NaN" || sv == "NA" || sv.empty())
            return std::numeric_limits<double>::quiet_NaN();
        throw std::runtime_error("parse error at line " + std::to_string(line) +
                                 ": bad number '" + std::string(sv) + "'");
    }
    return v;
}

inline long parse_int(std::string_view sv, int line) {
    long v{};
    const auto res = std::from_chars(sv.data(), sv.data() + sv.size(), v);
    if (res.ec != std::errc() || res.ptr != sv.data() + sv.size())
        throw std::runtime_error("parse error at line " + std::to_string(line) +
                                 ": bad integer '" + std::string(sv) + "'");
    return v;
}

inline std::vector<std::string_view> split_csv(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t pos = 0;
    while (true) {
        const auto c = line.find(',', pos);
        if (c == std::string_view::npos) {
            out.push_back(line.substr(pos));
            break;
        }
        out.push_back(line.substr(pos, c - pos));
        pos = c + 1;
    }
    return out;
}

/// Iterate lines of a text blob, stripping one trailing '\r'.
template <typename Fn>
inline void for_each_line(std::string_view text, Fn&& fn) {
    std::size_t pos = 0;
    int line_no = 0;
    while (pos < text.size()) {
        auto eol = text.find('\n', pos);
        if (eol == std::string_view::npos) eol = text.size();
        std::string_view line(text.data() + pos, eol - pos);
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        pos = eol + 1;
        fn(++line_no, line);
    }
}

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

} // namespace detail

inline void write_file(const std::string& path, const std::string& bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + path);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw std::runtime_error("short write to " + path);
}

/// FNV-1a 64-bit digest, used to stamp inputs into output metadata.
inline std::string fnv1a64_hex(std::string_view bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[19];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return std::string("fnv1a64:") + buf;
}

/// Parse a year,value series CSV. Years must be contiguous and ascending;
/// all values must be finite.
inline AnnualSeries series_from_csv(const std::string& text) {
    AnnualSeries s;
    bool header_seen = false;
    detail::for_each_line(text, [&](int line_no, std::string_view line) {
        if (line.empty()) return;
        if (!header_seen) {
            if (line != "year,value")
                throw std::runtime_error("line 1: expected header year,value");
            header_seen = true;
            return;
        }
        const auto f = detail::split_csv(line);
        if (f.size() != 2)
            throw std::runtime_error("parse error at line " + std::to_string(line_no) +
                                     ": expected 2 fields");
        const long year = detail::parse_int(f[0], line_no);
        const double value = detail::parse_double(f[1], line_no);
        if (!std::isfinite(value))
            throw std::runtime_error("line " + std::to_string(line_no) +
                                     ": non-finite value");
        if (s.values.empty()) {
            s.start_year = static_cast<int>(year);
        } else if (year != s.start_year + s.n()) {
            throw std::runtime_error("line " + std::to_string(line_no) +
                                     ": years must be contiguous (expected " +
                                     std::to_string(s.start_year + s.n()) + ", got " +
                                     std::to_string(year) + ")");
        }
        s.values.push_back(value);
    });
    if (!header_seen) throw std::runtime_error("empty series csv");
    if (s.n() < 3)
        throw std::runtime_error("series csv needs at least 3 data rows, got " +
                                 std::to_string(s.n()));
    return s;
}

inline AnnualSeries load_series_csv(const std::string& path) {
    return series_from_csv(detail::read_file(path));
}

inline std::string series_to_csv(const AnnualSeries& s) {
    std::string out = "year,value\n";
    for (int t = 1; t <= s.n(); ++t) {
        out += std::to_string(s.year_of(t));
        out += ',';
        out += detail::fmt_double(s.values[t - 1]);
        out += '\n';
    }
    return out;
}

} // namespace trendbreak
