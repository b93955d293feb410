#pragma once

#include <cstddef>
#include <functional>

namespace nasaswin {

/// Worker cap from NASASWIN_THREADS (defaults to hardware concurrency, >= 1).
std::size_t worker_count();

/// Runs fn(i) for i in [0, n) on up to `workers` threads. Each index is
/// processed exactly once; callers store results by index so the outcome
/// never depends on the schedule. The first exception thrown is rethrown.
void parallel_for(std::size_t n, std::size_t workers, const std::function<void(std::size_t)>& fn);

}  // namespace nasaswin
