#pragma once

#include <cstdint>
#include <functional>

namespace sjrp::parallel {

/// Number of worker threads used by parallel_for (default: hardware).
void set_threads(int n);
int threads();

/// Static contiguous split of [0, n) across the pool; blocks until done.
/// Each index is processed by exactly one worker, so callers that write to
/// disjoint per-index slots get results independent of the worker count.
void parallel_for(int64_t n, const std::function<void(int64_t, int64_t)>& fn);

}  // namespace sjrp::parallel
