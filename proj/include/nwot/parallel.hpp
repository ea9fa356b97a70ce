#ifndef NWOT_PARALLEL_HPP
#define NWOT_PARALLEL_HPP

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

/**
 * @file parallel.hpp
 *
 * @brief Minimal fork-join helper for independent restarts and sweep entries.
 */

namespace nwot {

/// Worker cap: NWOT_THREADS if set to a positive integer, otherwise the hardware concurrency.
inline int thread_limit() {
    if (const char* env = std::getenv("NWOT_THREADS")) {
        try {
            const int v = std::stoi(env);
            if (v > 0) {
                return v;
            }
        } catch (const std::exception&) {
        }
    }
    return static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
}

namespace detail {

inline thread_local bool inside_parallel_region = false;

} // namespace detail

/**
 * Runs fn(0), ..., fn(count - 1), possibly concurrently. Nested calls run serially.
 * The first exception thrown by any task is rethrown after all workers finish.
 */
template <class Fn>
void parallel_for(int count, Fn&& fn) {
    const int workers = std::min(count, detail::inside_parallel_region ? 1 : thread_limit());
    if (workers <= 1) {
        for (int i = 0; i < count; ++i) {
            fn(i);
        }
        return;
    }
    std::atomic<int> next{0};
    std::exception_ptr error;
    std::mutex error_lock;
    auto body = [&]() {
        detail::inside_parallel_region = true;
        while (true) {
            const int i = next.fetch_add(1);
            if (i >= count) {
                break;
            }
            try {
                fn(i);
            } catch (...) {
                std::lock_guard<std::mutex> guard(error_lock);
                if (!error) {
                    error = std::current_exception();
                }
            }
        }
        detail::inside_parallel_region = false;
    };
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers - 1));
    for (int w = 1; w < workers; ++w) {
        pool.emplace_back(body);
    }
    body();
    for (auto& t : pool) {
        t.join();
    }
    if (error) {
        std::rethrow_exception(error);
    }
}

} // namespace nwot

#endif
