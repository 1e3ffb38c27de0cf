#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace dispnet {

/// Worker count from DISPNET_WORKERS, else the hardware concurrency (at least 1).
int default_workers();

/// Runs body(i) for i in [0, n) on up to `workers` threads. Work is claimed
/// dynamically; callers that need determinism write results by index. The
/// first exception thrown by any body is rethrown after all threads join.
template <class Body>
void parallel_for(std::size_t n, int workers, Body&& body) {
  if (workers <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto run = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= n) return;
      try {
        body(i);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
        next.store(n);
      }
    }
  };
  const std::size_t count = std::min<std::size_t>(static_cast<std::size_t>(workers), n);
  std::vector<std::thread> threads;
  threads.reserve(count - 1);
  for (std::size_t t = 1; t < count; ++t) threads.emplace_back(run);
  run();
  for (auto& t : threads) t.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace dispnet
