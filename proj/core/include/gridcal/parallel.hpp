// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace gridcal {

/// Worker count: `requested` when positive, otherwise the hardware concurrency.
inline std::size_t resolve_jobs(int requested) {
    if (requested > 0) return static_cast<std::size_t>(requested);
    return std::max<std::size_t>(1, std::thread::hardware_concurrency());
}

/// Runs body(i) for i in [0, count) on up to `jobs` threads. Indices are handed out
/// dynamically; callers must write results by index. The first exception thrown by
/// any body (lowest index wins) is rethrown after all workers finish.
template <typename Body>
void parallel_for(std::size_t count, std::size_t jobs, Body&& body) {
    jobs = std::max<std::size_t>(1, std::min(jobs, count));
    if (jobs <= 1) {
        for (std::size_t i = 0; i < count; ++i) body(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::mutex error_mutex;
    std::exception_ptr error;
    std::size_t error_index = count;

    auto worker = [&] {
        for (std::size_t i = next.fetch_add(1); i < count; i = next.fetch_add(1)) {
            try {
                body(i);
            } catch (...) {
                std::lock_guard lock(error_mutex);
                if (i < error_index) {
                    error_index = i;
                    error = std::current_exception();
                }
            }
        }
    };
    std::vector<std::thread> threads;
    threads.reserve(jobs - 1);
    for (std::size_t t = 1; t < jobs; ++t) threads.emplace_back(worker);
    worker();
    for (auto& thread : threads) thread.join();
    if (error) std::rethrow_exception(error);
}

}  // namespace gridcal
