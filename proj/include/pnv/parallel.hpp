#pragma once

// Thread budget honoring the PNV_THREADS environment variable. Work items
// write to disjoint slots, so the split cannot change results.

#include <cstdint>
#include <cstdlib>
#include <thread>
#include <vector>

namespace pnv {

inline int thread_budget() {
  int n = static_cast<int>(std::thread::hardware_concurrency());
  if (n <= 0) n = 1;
  if (const char* env = std::getenv("PNV_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && v > 0 && v < 1024) n = static_cast<int>(v);
  }
  return n;
}

// Runs fn(i) for i in [0, n); contiguous chunks per worker.
template <typename F>
void parallel_for(int64_t n, F&& fn) {
  const int workers = std::min<int64_t>(thread_budget(), n);
  if (workers <= 1) {
    for (int64_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(static_cast<size_t>(workers));
  const int64_t chunk = (n + workers - 1) / workers;
  for (int w = 0; w < workers; ++w) {
    const int64_t lo = w * chunk;
    const int64_t hi = std::min(n, lo + chunk);
    if (lo >= hi) break;
    pool.emplace_back([lo, hi, &fn] {
      for (int64_t i = lo; i < hi; ++i) fn(i);
    });
  }
  for (auto& t : pool) t.join();
}

}  // namespace pnv
