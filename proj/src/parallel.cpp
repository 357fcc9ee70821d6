#include "knotflow/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <string>
#include <thread>
#include <vector>

namespace knotflow {

namespace {

std::size_t initial_thread_count() {
    if (const char *env = std::getenv("KNOTFLOW_THREADS")) {
        try {
            long v = std::stol(env);
            if (v >= 1) return static_cast<std::size_t>(v);
        } catch (...) {
        }
    }
    return std::max<std::size_t>(1, std::thread::hardware_concurrency());
}

std::atomic<std::size_t> &threads() {
    static std::atomic<std::size_t> n{initial_thread_count()};
    return n;
}

} // namespace

std::size_t thread_count() { return threads().load(); }

void set_thread_count(std::size_t n) { threads().store(std::max<std::size_t>(1, n)); }

std::size_t block_count(std::size_t n) {
    // Tiny loops are not worth a thread.
    return std::max<std::size_t>(1, std::min(thread_count(), n / 256));
}

void parallel_blocks(std::size_t n,
                     const std::function<void(std::size_t, std::size_t, std::size_t)> &body) {
    const std::size_t blocks = block_count(n);
    auto range = [&](std::size_t b) {
        return std::pair{n * b / blocks, n * (b + 1) / blocks};
    };
    if (blocks == 1) {
        body(0, n, 0);
        return;
    }
    std::vector<std::exception_ptr> errors(blocks);
    std::vector<std::thread> workers;
    workers.reserve(blocks - 1);
    for (std::size_t b = 1; b < blocks; ++b) {
        workers.emplace_back([&, b] {
            try {
                auto [lo, hi] = range(b);
                body(lo, hi, b);
            } catch (...) {
                errors[b] = std::current_exception();
            }
        });
    }
    try {
        auto [lo, hi] = range(0);
        body(lo, hi, 0);
    } catch (...) {
        errors[0] = std::current_exception();
    }
    for (auto &w : workers) w.join();
    for (auto &e : errors)
        if (e) std::rethrow_exception(e);
}

} // namespace knotflow
