#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <thread>
#include <vector>

namespace gsae {

// Splits [0, n) into contiguous chunks, one worker thread per chunk.
// Callers must only write disjoint per-index outputs (or reduce the chunk
// results with an order-independent rule afterwards), so results are
// identical for every thread count. Bodies must not throw.
inline void parallel_for(std::int64_t n, int threads,
                         const std::function<void(std::int64_t, std::int64_t)>& body) {
  if (n <= 0) return;
  const int workers = std::max(1, threads);
  if (workers == 1 || n < 2 * static_cast<std::int64_t>(workers)) {
    body(0, n);
    return;
  }
  const std::int64_t chunk = (n + workers - 1) / workers;
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(workers));
  for (std::int64_t begin = 0; begin < n; begin += chunk) {
    const std::int64_t end = std::min(n, begin + chunk);
    pool.emplace_back([&body, begin, end] { body(begin, end); });
  }
  for (auto& t : pool) t.join();
}

}  // namespace gsae
