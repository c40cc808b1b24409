#pragma once

#include <cstddef>
#include <functional>

namespace bagreg {

/// Worker count: BAGREG_THREADS if set and positive, otherwise the hardware concurrency.
std::size_t thread_count();

/// Runs body(i) for i in [0, n), splitting the range into contiguous blocks across threads.
/// Each index is visited exactly once; results written to per-index slots are
/// independent of the thread count.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace bagreg
