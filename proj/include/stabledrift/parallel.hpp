#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace sdrift {

// Runs fn(i, worker) for i in [0, n) on up to `threads` workers with dynamic
// scheduling. The first exception thrown by any task is rethrown here.
template <class Fn>
void parallel_for(std::size_t n, int threads, Fn&& fn) {
    const int w = std::max(1, std::min<int>(threads, static_cast<int>(n)));
    if (w <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i, 0);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr err;
    std::mutex err_mutex;
    auto work = [&](int id) {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= n) return;
            try {
                fn(i, id);
            } catch (...) {
                std::lock_guard<std::mutex> lock(err_mutex);
                if (!err) err = std::current_exception();
                next.store(n);
            }
        }
    };
    std::vector<std::thread> pool;
    for (int id = 1; id < w; ++id) pool.emplace_back(work, id);
    work(0);
    for (auto& t : pool) t.join();
    if (err) std::rethrow_exception(err);
}

inline int default_threads() {
    const unsigned h = std::thread::hardware_concurrency();
    return h == 0 ? 1 : static_cast<int>(h);
}

}  // namespace sdrift
