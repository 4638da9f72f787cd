#pragma once

#include <cstddef>
#include <functional>

namespace mvsfuse {

/// Caps the worker count used by parallel_blocks. 0 restores the hardware default.
void set_max_threads(int n);
int max_threads();

/// Runs fn(begin, end) over a partition of [0, n) and blocks until done.
/// Callers must write only to disjoint, preallocated outputs so the result is
/// identical for any thread count.
void parallel_blocks(std::size_t n, const std::function<void(std::size_t, std::size_t)>& fn);

}  // namespace mvsfuse
