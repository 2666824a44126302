#pragma once

#include <cstddef>
#include <functional>

namespace sgm {

// Worker count: SGM_THREADS when set to a positive integer, otherwise the
// hardware concurrency. A process-wide override (set_thread_count) wins over
// both; pass 0 to clear it.
std::size_t thread_count();
void set_thread_count(std::size_t n);

// Runs body(i) for i in [0, n) on up to thread_count() workers. Work items
// are claimed dynamically; body must write only to item-private outputs.
// The exception from the lowest failing index is rethrown after all workers
// join. Calls made from inside a worker run serially.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace sgm
