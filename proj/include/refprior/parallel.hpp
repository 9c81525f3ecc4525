#pragma once

#include <cstddef>
#include <functional>

namespace refprior {

// Worker count: explicit value if positive, else REFPRIOR_THREADS, else
// hardware concurrency.
std::size_t resolve_threads(std::size_t requested);

// Runs body(i) for i in [0, n) on `threads` workers. Tasks are claimed from
// a shared counter; results must be written by index. The first exception
// thrown by any task is rethrown after all workers stop.
void parallel_for(std::size_t n, std::size_t threads, const std::function<void(std::size_t)>& body);

}  // namespace refprior
