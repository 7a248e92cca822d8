#pragma once

#include <cstddef>
#include <functional>

namespace spdnn {

/// Worker threads available to the executor: SPDNN_THREADS when set to a
/// positive integer, otherwise the hardware concurrency.
std::size_t worker_count();

/// Runs fn(i) for every i in [0, n). Iterations are split into contiguous
/// chunks, one per worker; each index is processed exactly once, so results
/// do not depend on the thread count as long as iterations write disjoint
/// memory. `work_per_item` is a rough cost estimate used to stay serial on
/// small problems.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn,
                  std::size_t work_per_item = 0);

} // namespace spdnn
