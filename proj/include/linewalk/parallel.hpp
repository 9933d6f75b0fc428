#pragma once

// Deterministic fan-out: task i always writes slot i, so results never depend
// on scheduling or on the worker count.

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace linewalk {

inline unsigned resolve_workers(unsigned requested) {
  if (requested > 0) return requested;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? hw : 1;
}

/// Runs fn(state, i) for i in [0, n) on `workers` threads (0 = hardware
/// concurrency). Each worker gets its own state from make_state(), which is
/// how lazily memoised environments stay unshared. The first exception thrown
/// by any task is rethrown after all workers stop.
template <class Result, class MakeState, class Fn>
std::vector<Result> parallel_map(std::size_t n, unsigned workers, MakeState make_state, Fn fn) {
  std::vector<Result> out(n);
  const unsigned w =
      static_cast<unsigned>(std::min<std::size_t>(resolve_workers(workers), std::max<std::size_t>(n, 1)));
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr error;
  std::mutex error_mutex;

  auto body = [&] {
    try {
      auto state = make_state();
      for (;;) {
        if (failed.load(std::memory_order_relaxed)) return;
        const std::size_t i = next.fetch_add(1, std::memory_order_relaxed);
        if (i >= n) return;
        out[i] = fn(state, i);
      }
    } catch (...) {
      std::lock_guard lock(error_mutex);
      if (!error) error = std::current_exception();
      failed = true;
    }
  };

  if (w <= 1) {
    body();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(w);
    for (unsigned k = 0; k < w; ++k) pool.emplace_back(body);
    for (auto& th : pool) th.join();
  }
  if (error) std::rethrow_exception(error);
  return out;
}

}  // namespace linewalk
