#pragma once

#include <exception>
#include <mutex>
#include <thread>
#include <vector>

#include "recfair/types.hpp"

namespace recfair {

// Static-stride fan-out over [0, n). Each index writes only its own output
// slot, so results are deterministic regardless of scheduling. The first
// exception thrown by any worker is rethrown on the calling thread.
template <typename F>
void parallel_for(Index n, F&& body) {
  const unsigned hw = std::thread::hardware_concurrency();
  const Index workers = std::min<Index>(n, hw > 0 ? static_cast<Index>(hw) : 1);
  if (workers <= 1) {
    for (Index i = 0; i < n; ++i) body(i);
    return;
  }
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(workers));
  for (Index t = 0; t < workers; ++t) {
    pool.emplace_back([&, t] {
      try {
        for (Index i = t; i < n; i += workers) body(i);
      } catch (...) {
        const std::lock_guard<std::mutex> lock(error_mutex);
        if (!error) error = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace recfair
