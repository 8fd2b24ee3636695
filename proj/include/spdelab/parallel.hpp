#pragma once

#include <cstddef>
#include <functional>

namespace spdelab {

/// Calls body(i) for i in [0, count) on `threads` workers (0 = hardware concurrency).
/// Work is claimed one index at a time, so body must write only to slot i of any shared
/// output. If bodies throw, the exception from the smallest index is rethrown after all
/// workers stop, which keeps error reports independent of scheduling.
void parallel_for(std::size_t count, unsigned threads, const std::function<void(std::size_t)>& body);

}  // namespace spdelab
