#pragma once

#include <cstdlib>
#include <functional>
#include <thread>
#include <vector>

namespace diffmn {

// Thread cap: DIFFMN_THREADS when set, hardware concurrency otherwise.
inline int max_threads() {
    if (const char* env = std::getenv("DIFFMN_THREADS")) {
        const int n = std::atoi(env);
        if (n >= 1) return n;
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
}

// Index-parallel loop over [0, n). Each index must write only to its own
// slots, which keeps results identical for any thread count.
inline void parallel_for(int n, const std::function<void(int)>& body) {
    const int threads = std::min(max_threads(), n);
    if (threads <= 1) {
        for (int i = 0; i < n; ++i) body(i);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (int w = 0; w < threads; ++w) {
        pool.emplace_back([&, w]() {
            for (int i = w; i < n; i += threads) body(i);
        });
    }
    for (auto& t : pool) t.join();
}

}  // namespace diffmn
