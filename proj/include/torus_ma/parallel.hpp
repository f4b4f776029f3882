#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdlib>
#include <string>
#include <thread>
#include <vector>

namespace torus_ma {

/// Upper bound on worker threads for pointwise loops. Read once from
/// TORUS_MA_THREADS; defaults to the hardware concurrency.
inline unsigned thread_cap() {
  static const unsigned cap = [] {
    unsigned hw = std::max(1u, std::thread::hardware_concurrency());
    if (const char* env = std::getenv("TORUS_MA_THREADS")) {
      try {
        long v = std::stol(env);
        if (v >= 1) return static_cast<unsigned>(std::min<long>(v, hw));
      } catch (...) {
      }
    }
    return hw;
  }();
  return cap;
}

// Each index is visited exactly once, so results do not depend on the
// thread count.
template <class Fn>
void parallel_for(std::size_t count, Fn&& fn, std::size_t min_chunk = 4096) {
  unsigned workers = thread_cap();
  if (workers <= 1 || count < 2 * min_chunk) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  workers = static_cast<unsigned>(std::min<std::size_t>(workers, count / min_chunk));
  std::vector<std::jthread> pool;
  pool.reserve(workers);
  const std::size_t chunk = (count + workers - 1) / workers;
  for (unsigned w = 0; w < workers; ++w) {
    const std::size_t lo = w * chunk;
    const std::size_t hi = std::min(count, lo + chunk);
    if (lo >= hi) break;
    pool.emplace_back([lo, hi, &fn] {
      for (std::size_t i = lo; i < hi; ++i) fn(i);
    });
  }
}

}  // namespace torus_ma
