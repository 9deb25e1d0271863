#pragma once

#include <cstddef>
#include <functional>
#include <thread>
#include <vector>

namespace garment {

// Static row/range partition across hardware threads. Chunks are disjoint, so
// callers that only write their own range stay deterministic.
inline void parallel_for(size_t begin, size_t end, const std::function<void(size_t, size_t)>& body) {
  const size_t n = end > begin ? end - begin : 0;
  if (n == 0) return;
  size_t threads = std::thread::hardware_concurrency();
  if (threads < 2 || n < 2 * threads) {
    body(begin, end);
    return;
  }
  if (threads > n) threads = n;
  const size_t chunk = (n + threads - 1) / threads;
  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (size_t t = 0; t < threads; ++t) {
    const size_t lo = begin + t * chunk;
    if (lo >= end) break;
    const size_t hi = lo + chunk < end ? lo + chunk : end;
    pool.emplace_back([&body, lo, hi] { body(lo, hi); });
  }
  for (auto& th : pool) th.join();
}

}  // namespace garment
