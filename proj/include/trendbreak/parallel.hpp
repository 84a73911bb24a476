#pragma once

#include <algorithm>
#include <functional>
#include <thread>
#include <vector>

namespace trendbreak {

/// Run fn(i) for i in [0, count) on up to `workers` threads. Work is split
/// into contiguous chunks; callers write results into pre-sized storage
/// indexed by i, which keeps output independent of the worker count.
inline void parallel_for(int count, int workers, const std::function<void(int)>& fn) {
    if (count <= 0) return;
    workers = std::max(1, std::min(workers, count));
    if (workers == 1) {
        for (int i = 0; i < count; ++i) fn(i);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(workers);
    const int chunk = (count + workers - 1) / workers;
    for (int w = 0; w < workers; ++w) {
        const int lo = w * chunk;
        const int hi = std::min(count, lo + chunk);
        if (lo >= hi) break;
        pool.emplace_back([lo, hi, &fn] {
            for (int i = lo; i < hi; ++i) fn(i);
        });
    }
    for (auto& t : pool) t.join();
}

} // namespace trendbreak
