#pragma once

#include <cmath>
#include <cstdint>

namespace trendbreak {

// Counter-based pseudo-random numbers built on the splitmix64 finalizer.
// Every draw is a pure function of (key, counter), so streams can be
// evaluated in any order and on any number of threads with identical
// results. Quality is adequate for Monte Carlo work of this kind.

inline std::uint64_t mix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Derive an independent stream key from a base seed and a stream index.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
    return mix64(seed ^ mix64(stream + 0x632be59bd9b4e019ULL));
}

namespace detail {

inline std::uint64_t counter_u64(std::uint64_t key, std::uint64_t ctr) {
    return mix64(key + ctr * 0x9e3779b97f4a7c15ULL);
}

// uniform in (0, 1]; never returns 0 so log() below is safe
inline double counter_uniform(std::uint64_t key, std::uint64_t ctr) {
    return static_cast<double>((counter_u64(key, ctr) >> 11) + 1) * 0x1.0p-53;
}

} // namespace detail

/// Standard normal deviate, indexed form: value `i` of stream `key`.
/// Box-Muller on two counter draws; one normal per index.
inline double normal_at(std::uint64_t key, std::int64_t index) {
    const auto i = static_cast<std::uint64_t>(index);
    const double u1 = detail::counter_uniform(key, 2 * i);
    const double u2 = detail::counter_uniform(key, 2 * i + 1);
    constexpr double two_pi = 6.283185307179586476925286766559;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(two_pi * u2);
}

/// Sequential convenience wrapper over the counter scheme.
class Rng {
public:
    explicit Rng(std::uint64_t seed, std::uint64_t stream = 0)
        : key_(derive_seed(seed, stream)) {}

    std::uint64_t next_u64() { return detail::counter_u64(key_, ctr_++); }

    /// uniform in [0, 1)
    double next_uniform() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    double next_normal() {
        const double u1 = detail::counter_uniform(key_, ctr_++);
        const double u2 = detail::counter_uniform(key_, ctr_++);
        constexpr double two_pi = 6.283185307179586476925286766559;
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(two_pi * u2);
    }

private:
    std::uint64_t key_;
    std::uint64_t ctr_ = 0;
};

} // namespace trendbreak
