#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace nparc {

/// Runs body(i) for i in [0, count) on up to `workers` threads. body(i) must
/// depend only on i for results to be independent of the worker count.
/// The first exception thrown by any task is rethrown on the caller.
template <class Body>
void parallel_for(std::size_t count, unsigned workers, Body&& body) {
    workers = std::max(1u, workers);
    if (workers == 1 || count <= 1) {
        for (std::size_t i = 0; i < count; ++i) body(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto run = [&] {
        for (;;) {
            std::size_t i = next.fetch_add(1);
            if (i >= count) return;
            try {
                body(i);
            } catch (...) {
                std::lock_guard lock(failure_mutex);
                if (!failure) failure = std::current_exception();
                next.store(count);
                return;
            }
        }
    };
    std::vector<std::jthread> pool;
    const unsigned n = static_cast<unsigned>(std::min<std::size_t>(workers, count));
    pool.reserve(n);
    for (unsigned w = 0; w < n; ++w) pool.emplace_back(run);
    pool.clear();
    if (failure) std::rethrow_exception(failure);
}

}  // namespace nparc
