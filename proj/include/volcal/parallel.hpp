#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace volcal {

inline std::size_t default_workers() {
    const unsigned n = std::thread::hardware_concurrency();
    return n == 0 ? 1 : n;
}

/// Runs fn(i) for i in [0, n) on up to `workers` threads (0 = all cores).
/// If any call throws, the exception from the lowest index is rethrown, so the
/// observable outcome does not depend on the worker count.
template <class Fn>
void parallel_for(std::size_t n, std::size_t workers, Fn&& fn) {
    if (workers == 0) workers = default_workers();
    workers = std::min(workers, n);
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }

    std::atomic<std::size_t> next{0};
    std::mutex mu;
    std::size_t failed_index = n;
    std::exception_ptr failure;

    auto body = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= n) return;
            {
                std::lock_guard lock(mu);
                if (i > failed_index) return;
            }
            try {
                fn(i);
            } catch (...) {
                std::lock_guard lock(mu);
                if (i < failed_index) {
                    failed_index = i;
                    failure = std::current_exception();
                }
            }
        }
    };

    std::vector<std::thread> pool;
    pool.reserve(workers - 1);
    for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(body);
    body();
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);
}

}  // namespace volcal
