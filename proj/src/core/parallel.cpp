// Copyright Contributors to the dragon-splat project
// SPDX-License-Identifier: Apache-2.0
#include "dragon/core/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace dragon {

namespace {
std::atomic<int> g_max_threads{0};
}

void set_max_threads(int threads) { g_max_threads = std::max(0, threads); }

int max_threads() {
    const int requested = g_max_threads.load();
    if (requested > 0) return requested;
    return std::max(1u, std::thread::hardware_concurrency());
}

void parallel_for_worker(std::size_t begin, std::size_t end,
                         const std::function<void(std::size_t, int)>& body) {
    if (end <= begin) return;
    const std::size_t count = end - begin;
    const int workers = static_cast<int>(std::min<std::size_t>(max_threads(), count));
    if (workers <= 1) {
        for (std::size_t i = begin; i < end; ++i) body(i, 0);
        return;
    }
    std::atomic<std::size_t> next{begin};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto run = [&](int slot) {
        try {
            for (std::size_t i = next++; i < end; i = next++) body(i, slot);
        } catch (...) {
            std::lock_guard lock(failure_mutex);
            if (!failure) failure = std::current_exception();
            next = end;
        }
    };
    std::vector<std::thread> pool;
    pool.reserve(workers - 1);
    for (int w = 1; w < workers; ++w) pool.emplace_back(run, w);
    run(0);
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);
}

void parallel_for(std::size_t begin, std::size_t end,
                  const std::function<void(std::size_t)>& body) {
    parallel_for_worker(begin, end, [&](std::size_t i, int) { body(i); });
}

} // namespace dragon
