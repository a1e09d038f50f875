#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace wss {

/// Runs fn(i) for i in [0, count) on up to `workers` threads. Work is claimed by index, so
/// any result written to slot i is independent of the worker count. The first exception
/// thrown by fn is rethrown after all threads join.
template <typename Fn>
void parallel_for(std::size_t count, int workers, Fn&& fn) {
    if (workers <= 1 || count <= 1) {
        for (std::size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto body = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= count) return;
            try {
                fn(i);
            } catch (...) {
                std::lock_guard lock(failure_mutex);
                if (!failure) failure = std::current_exception();
                next.store(count);
            }
        }
    };
    const auto n = std::min<std::size_t>(static_cast<std::size_t>(workers), count);
    std::vector<std::jthread> threads;
    threads.reserve(n - 1);
    for (std::size_t t = 1; t < n; ++t) threads.emplace_back(body);
    body();
    threads.clear();
    if (failure) std::rethrow_exception(failure);
}

}  // namespace wss
