#pragma once

#include <cstddef>
#include <functional>

namespace aggmogp {

/// Worker cap: the AGGMOGP_THREADS environment variable when set to a
/// positive integer, otherwise std::thread::hardware_concurrency().
std::size_t worker_count();

/// Runs body(i) for i in [0, n). Iterations may run concurrently; callers
/// write results into per-index slots and reduce them in index order, which
/// keeps every sum independent of scheduling. Nested calls run serially.
void parallel_for(std::size_t n, const std::function<void(std::size_t)> &body);

} // namespace aggmogp
