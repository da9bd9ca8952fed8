#pragma once

#include <cstddef>
#include <functional>

namespace volt {

// Worker count from VOLT_THREADS (0 or unset = hardware concurrency).
std::size_t thread_budget();

// Calls fn(i) for i in [0, n) across up to `threads` workers. Each index is
// handled exactly once; callers write to per-index slots so results do not
// depend on scheduling.
void parallel_for(std::size_t n, std::size_t threads, const std::function<void(std::size_t)>& fn);

}  // namespace volt
