#pragma once

#include <cstddef>
#include <functional>

namespace knotflow {

// Worker count used by the data-parallel loops. Initialized from the
// KNOTFLOW_THREADS environment variable (falls back to the hardware
// concurrency). A value of 1 selects the deterministic sequential mode.
std::size_t thread_count();
void set_thread_count(std::size_t n);

// Splits [0, n) into at most thread_count() contiguous blocks and runs
// body(begin, end, block) for each, one block per thread. Block boundaries
// only depend on n and the worker count, so reductions done in block order
// are reproducible for a fixed worker count.
std::size_t block_count(std::size_t n);
void parallel_blocks(std::size_t n,
                     const std::function<void(std::size_t, std::size_t, std::size_t)> &body);

} // namespace knotflow
