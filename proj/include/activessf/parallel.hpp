#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

namespace activessf {

inline unsigned default_worker_count() {
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : hw;
}

// Runs body(begin, end) over contiguous chunks of [0, n). Each index is visited
// exactly once; callers write only to per-index slots so results do not depend
// on scheduling.
template <typename Body>
void parallel_for(std::size_t n, std::size_t min_chunk, Body&& body, unsigned workers = 0) {
  if (workers == 0) workers = default_worker_count();
  const std::size_t chunks = std::min<std::size_t>(workers, std::max<std::size_t>(1, n / std::max<std::size_t>(1, min_chunk)));
  if (chunks <= 1) {
    body(std::size_t{0}, n);
    return;
  }
  std::vector<std::thread> threads;
  std::vector<std::exception_ptr> errors(chunks);
  const std::size_t step = (n + chunks - 1) / chunks;
  for (std::size_t c = 0; c < chunks; ++c) {
    const std::size_t begin = c * step;
    const std::size_t end = std::min(n, begin + step);
    if (begin >= end) break;
    threads.emplace_back([&, c, begin, end] {
      try {
        body(begin, end);
      } catch (...) {
        errors[c] = std::current_exception();
      }
    });
  }
  for (auto& t : threads) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace activessf
