#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

namespace pixinfo {

/// Runs body(i) for i in [0, n) over at most `workers` threads using a static
/// contiguous partition. Results must be written to per-index slots so the
/// outcome is independent of the worker count.
template <typename Body>
void parallel_for(std::size_t n, unsigned workers, Body&& body) {
  const std::size_t threads = std::min<std::size_t>(std::max(1u, workers), n);
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(threads);
  const std::size_t chunk = (n + threads - 1) / threads;
  for (std::size_t t = 0; t < threads; ++t) {
    pool.emplace_back([&, t] {
      try {
        const std::size_t end = std::min(n, (t + 1) * chunk);
        for (std::size_t i = t * chunk; i < end; ++i) body(i);
      } catch (...) {
        errors[t] = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace pixinfo
