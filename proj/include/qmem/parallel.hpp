#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace qmem {

// Worker count: QMEM_MATCH_THREADS if set and positive, else hardware concurrency.
inline unsigned worker_count() {
    unsigned n = std::max(1u, std::thread::hardware_concurrency());
    if (const char* env = std::getenv("QMEM_MATCH_THREADS")) {
        try {
            const long v = std::stol(env);
            if (v > 0) n = static_cast<unsigned>(v);
        } catch (const std::exception&) {
        }
    }
    return n;
}

// Runs body(i) for i in [0, count). Results must be written by index so the output does
// not depend on scheduling. The first exception (lowest index) is rethrown.
template <class Body>
void parallel_for(std::size_t count, Body&& body, unsigned threads = worker_count()) {
    threads = static_cast<unsigned>(std::min<std::size_t>(threads, count));
    if (threads <= 1) {
        for (std::size_t i = 0; i < count; ++i) body(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::mutex mu;
    std::size_t failed_at = count;
    std::exception_ptr failure;
    auto work = [&] {
        for (std::size_t i = next++; i < count; i = next++) {
            try {
                body(i);
            } catch (...) {
                std::lock_guard lock(mu);
                if (i < failed_at) {
                    failed_at = i;
                    failure = std::current_exception();
                }
            }
        }
    };
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(work);
    for (auto& th : pool) th.join();
    if (failure) std::rethrow_exception(failure);
}

} // namespace qmem
