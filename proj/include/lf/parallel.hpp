#pragma once

#include <algorithm>
#include <functional>
#include <thread>
#include <vector>

namespace lf {

//! Process-wide worker cap; 0 means hardware concurrency. Set once at startup
//! (e.g. from a CLI flag) before running pipeline stages.
void set_max_workers(int n);
int max_workers();
int resolved_workers();

//! Run fn(i) for i in [begin, end) on contiguous chunks, one per worker.
//! Outputs must be disjoint per index so results do not depend on scheduling.
inline void parallel_for(int begin, int end, const std::function<void(int)>& fn) {
    int n = end - begin;
    if (n <= 0) return;
    int workers = std::min(resolved_workers(), n);
    if (workers <= 1) {
        for (int i = begin; i < end; ++i) fn(i);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(workers);
    int chunk = (n + workers - 1) / workers;
    for (int w = 0; w < workers; ++w) {
        int lo = begin + w * chunk;
        int hi = std::min(end, lo + chunk);
        if (lo >= hi) break;
        pool.emplace_back([lo, hi, &fn] {
            for (int i = lo; i < hi; ++i) fn(i);
        });
    }
    for (auto& t : pool) t.join();
}

} // namespace lf
