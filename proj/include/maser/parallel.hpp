#pragma once

#include <algorithm>
#include <cstddef>
#include <thread>
#include <vector>

namespace maser {

/// Worker count: MASER_THREADS if set to a positive integer, else the
/// hardware concurrency (at least 1).
unsigned thread_count();

/// Runs body(i) for i in [0, count) on up to `threads` workers. Iterations
/// must write to disjoint outputs.
template <typename Body>
void parallel_for(std::size_t count, unsigned threads, Body&& body) {
  threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(count)));
  if (threads <= 1) {
    for (std::size_t i = 0; i < count; ++i) body(i);
    return;
  }
  std::vector<std::jthread> pool;
  pool.reserve(threads);
  for (unsigned t = 0; t < threads; ++t) {
    pool.emplace_back([&body, count, threads, t] {
      for (std::size_t i = t; i < count; i += threads) body(i);
    });
  }
}

}  // namespace maser
