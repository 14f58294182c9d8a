#include "aggmogp/parallel.hpp"

#include <atomic>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace aggmogp {

namespace {
thread_local bool g_inside_parallel = false;
}

std::size_t worker_count() {
  if (const char *env = std::getenv("AGGMOGP_THREADS")) {
    try {
      const long value = std::stol(env);
      if (value > 0)
        return static_cast<std::size_t>(value);
    } catch (const std::exception &) {
    }
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : hw;
}

void parallel_for(std::size_t n,
                  const std::function<void(std::size_t)> &body) {
  const std::size_t workers = std::min(worker_count(), n);
  if (workers <= 1 || g_inside_parallel) {
    for (std::size_t i = 0; i < n; ++i)
      body(i);
    return;
  }

  std::atomic<std::size_t> next{0};
  std::exception_ptr first_error;
  std::size_t first_error_index = n;
  std::mutex error_mutex;

  auto worker = [&] {
    g_inside_parallel = true;
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        body(i);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        // Report the lowest failing index so errors are deterministic too.
        if (i < first_error_index) {
          first_error_index = i;
          first_error = std::current_exception();
        }
      }
    }
    g_inside_parallel = false;
  };

  std::vector<std::thread> pool;
  pool.reserve(workers - 1);
  for (std::size_t w = 1; w < workers; ++w)
    pool.emplace_back(worker);
  worker();
  for (auto &t : pool)
    t.join();
  if (first_error)
    std::rethrow_exception(first_error);
}

} // namespace aggmogp
