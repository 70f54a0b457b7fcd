#pragma once

#include <cstddef>
#include <functional>

namespace lhsgp {

/// Worker count: `requested` if positive, else HSGP_THREADS if set, else the
/// hardware concurrency. Always at least 1.
std::size_t worker_count(std::size_t requested = 0);

/// Calls fn(i) for i in [0, count) on up to `workers` threads. Work items are
/// independent; the first exception thrown by any item is rethrown.
void parallel_for(std::size_t count, const std::function<void(std::size_t)>& fn,
                  std::size_t workers);

}  // namespace lhsgp
