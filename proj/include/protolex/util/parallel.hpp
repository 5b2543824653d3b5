// Copyright 2026 The Protolex Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef PROTOLEX_UTIL_PARALLEL_HPP_
#define PROTOLEX_UTIL_PARALLEL_HPP_

#include <atomic>
#include <cstdlib>
#include <exception>
#include <functional>
#include <thread>
#include <vector>

namespace protolex {

// Runs fn(i, worker) for i in [0, n). Each worker has a stable id in
// [0, n_threads) so callers can keep per-worker scratch buffers. Work items
// must be independent; any ordered reduction happens at the call site, which
// keeps results bitwise identical regardless of scheduling.
inline void ParallelFor(size_t n, int n_threads,
                        const std::function<void(size_t, int)>& fn) {
  if (n == 0) return;
  if (n_threads <= 1 || n == 1) {
    for (size_t i = 0; i < n; ++i) fn(i, 0);
    return;
  }
  std::atomic<size_t> next{0};
  std::exception_ptr error;
  std::atomic<bool> failed{false};
  std::vector<std::thread> workers;
  const int k = static_cast<int>(std::min<size_t>(n, n_threads));
  workers.reserve(k);
  for (int w = 0; w < k; ++w) {
    workers.emplace_back([&, w] {
      while (!failed.load(std::memory_order_relaxed)) {
        const size_t i = next.fetch_add(1);
        if (i >= n) break;
        try {
          fn(i, w);
        } catch (...) {
          if (!failed.exchange(true)) error = std::current_exception();
          break;
        }
      }
    });
  }
  for (auto& t : workers) t.join();
  if (error) std::rethrow_exception(error);
}

// Thread count: explicit request wins, then the PROTOLEX_THREADS environment
// override, then the hardware count.
inline int ResolveThreads(int requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("PROTOLEX_THREADS")) {
    const int v = std::atoi(env);
    if (v > 0) return v;
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

}  // namespace protolex

#endif  // PROTOLEX_UTIL_PARALLEL_HPP_
