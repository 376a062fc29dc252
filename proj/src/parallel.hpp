#pragma once

#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace finsler::detail {

// Runs f(i) for i in [0, n) on a small worker pool. Each index owns its
// output slot, so results are independent of the thread count; the first
// exception wins and is rethrown after the pool drains. Index 0 runs on the
// calling thread first so lazy one-time setup (collar estimates, chart
// tapes) is warmed before workers start.
template <class F>
void parallel_for(std::size_t n, unsigned threads, F&& f) {
  if (n == 0) return;
  unsigned workers = threads ? threads : std::thread::hardware_concurrency();
  if (workers == 0) workers = 1;
  if (workers > 8) workers = 8;

  f(std::size_t{0});
  if (workers <= 1 || n < 16) {
    for (std::size_t i = 1; i < n; ++i) f(i);
    return;
  }

  std::atomic<std::size_t> next{1};
  std::exception_ptr first_error = nullptr;
  std::mutex error_mutex;
  auto worker = [&]() {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= n) return;
      try {
        f(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  for (unsigned w = 0; w < workers; ++w) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
  if (first_error) std::rethrow_exception(first_error);
}

}  // namespace finsler::detail
