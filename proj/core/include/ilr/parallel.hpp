#pragma once

#include <cstddef>
#include <functional>

namespace ilr {

// Worker cap: ILR_THREADS when set to a positive integer, otherwise the
// number of hardware threads.
std::size_t worker_count();

// Runs fn(i) for i in [0, n). Work is split into contiguous index ranges;
// callers write results into per-index slots and reduce in index order so
// the outcome does not depend on the worker count.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace ilr
