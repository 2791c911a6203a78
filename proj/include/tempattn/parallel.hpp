#pragma once

#include <functional>
#include <thread>
#include <vector>

namespace tempattn {

inline int resolve_threads(int requested) {
    if (requested > 0) return requested;
    unsigned hw = std::thread::hardware_concurrency();
    return hw ? static_cast<int>(hw) : 1;
}

/// Static-partition parallel loop. Each index is processed exactly once and
/// writes only its own outputs, so results never depend on the worker count;
/// any reduction happens afterwards in index order.
inline void parallel_for(int n, int threads, const std::function<void(int)>& fn) {
    threads = std::min(resolve_threads(threads), n);
    if (n <= 0) return;
    if (threads <= 1) {
        for (int i = 0; i < n; ++i) fn(i);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (int w = 0; w < threads; ++w) {
        pool.emplace_back([&, w]() {
            for (int i = w; i < n; i += threads) fn(i);
        });
    }
    for (auto& t : pool) t.join();
}

}  // namespace tempattn
