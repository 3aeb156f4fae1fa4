#pragma once

#include <cstddef>
#include <functional>

namespace protoexplain {

// Worker count: PROTOEXPLAIN_THREADS if set and positive, otherwise the
// hardware concurrency (at least 1).
std::size_t thread_count();

// Runs body(begin, end) over contiguous chunks of [0, n). Chunks never
// overlap, so writes to per-index slots need no synchronization.
void parallel_for(std::size_t n, std::size_t threads,
                  const std::function<void(std::size_t, std::size_t)>& body);

}  // namespace protoexplain
