#pragma once

#include <cstddef>
#include <functional>

namespace radon_roi {

/// Worker count: RADON_ROI_THREADS if set to a positive integer, otherwise the
/// hardware concurrency (at least 1).
std::size_t thread_count();

/// Calls fn(i) for every i in [0, n), spread over at most thread_count()
/// threads. The first exception thrown by any call is rethrown.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace radon_roi
