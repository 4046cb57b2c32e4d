#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace mrb {

// Runs fn(i) for i in [0, n) on up to `jobs` threads. Callers write results
// into index i of a preallocated buffer so output order never depends on the
// schedule. The first exception thrown by any task is rethrown.
template <typename Fn> void parallel_for(std::size_t n, unsigned jobs, Fn &&fn)
{
  jobs = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(std::max<std::size_t>(n, 1))));
  if (jobs == 1) {
    for (std::size_t i = 0; i < n; ++i) {
      fn(i);
    }
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> workers;
  workers.reserve(jobs);
  for (unsigned t = 0; t < jobs; ++t) {
    workers.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!failure) {
            failure = std::current_exception();
          }
        }
      }
    });
  }
  for (auto &w : workers) {
    w.join();
  }
  if (failure) {
    std::rethrow_exception(failure);
  }
}

} // namespace mrb
