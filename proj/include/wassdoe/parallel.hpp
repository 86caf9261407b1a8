#pragma once

#include <cstddef>
#include <functional>

namespace wassdoe {

/// Worker cap for task-parallel loops. 0 means "use WASSDOE_THREADS or
/// hardware concurrency".
void set_max_threads(std::size_t threads);
std::size_t max_threads();

/// Runs body(i) for i in [0, count). Tasks must write to disjoint outputs;
/// results are independent of the worker count. The first exception thrown
/// by any task is rethrown after all workers join.
void parallel_for(std::size_t count, const std::function<void(std::size_t)>& body);

}  // namespace wassdoe
