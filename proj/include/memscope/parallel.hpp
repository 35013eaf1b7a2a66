#pragma once

#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace memscope {

/// Calls fn(i) for i in [0, n) on up to `jobs` threads. The first exception
/// stops further work and is rethrown.
template <typename Fn>
void parallel_for(std::size_t n, unsigned jobs, Fn&& fn) {
  if (jobs <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  std::exception_ptr failure;
  std::mutex m;
  std::size_t next = 0;
  for (unsigned t = 0; t < jobs && t < n; ++t)
    pool.emplace_back([&] {
      while (true) {
        std::size_t i;
        {
          std::lock_guard lock(m);
          if (next >= n || failure) return;
          i = next++;
        }
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(m);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  for (auto& th : pool) th.join();
  if (failure) std::rethrow_exception(failure);
}

}  // namespace memscope
