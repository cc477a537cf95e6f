#pragma once

#include <atomic>
#include <cstddef>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace ipsi {

// Runs fn(i) for i in [0, n) on up to `workers` threads (0 = hardware count).
// Callers own determinism by writing results into index-addressed slots. The
// first exception raised by any task is rethrown on the calling thread after
// the pool drains.
inline void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& fn) {
    if (n == 0) return;
    unsigned int k = workers > 0 ? static_cast<unsigned int>(workers)
                                 : std::max(1u, std::thread::hardware_concurrency());
    k = static_cast<unsigned int>(std::min<std::size_t>(k, n));
    if (k <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr first_error;
    std::mutex error_mu;
    std::atomic<bool> stop{false};
    std::vector<std::thread> pool;
    pool.reserve(k);
    for (unsigned int t = 0; t < k; ++t)
        pool.emplace_back([&] {
            for (;;) {
                if (stop.load(std::memory_order_relaxed)) return;
                const std::size_t i = next.fetch_add(1);
                if (i >= n) return;
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(error_mu);
                    if (!first_error) first_error = std::current_exception();
                    stop.store(true, std::memory_order_relaxed);
                }
            }
        });
    for (std::thread& th : pool) th.join();
    if (first_error) std::rethrow_exception(first_error);
}

} // namespace ipsi
