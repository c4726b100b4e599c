#pragma once

#include <algorithm>
#include <cstddef>
#include <thread>
#include <vector>

namespace dose {

// Process-wide cap on worker threads (>= 1). Set once by the CLI from
// --threads / DOSE_THREADS; defaults to hardware concurrency.
void set_thread_count(std::size_t n) noexcept;
[[nodiscard]] std::size_t thread_count() noexcept;

// Calls body(begin, end) over disjoint contiguous chunks of [0, n).
// Bodies must write only to their own index range; the result is then
// identical for every thread count.
template <typename Body>
void parallel_for(std::size_t n, Body&& body, std::size_t min_chunk = 1024) {
  const std::size_t workers =
      std::min(thread_count(), std::max<std::size_t>(1, n / std::max<std::size_t>(1, min_chunk)));
  if (workers <= 1) {
    body(std::size_t{0}, n);
    return;
  }
  const std::size_t chunk = (n + workers - 1) / workers;
  std::vector<std::thread> pool;
  pool.reserve(workers - 1);
  for (std::size_t w = 1; w < workers; ++w) {
    const std::size_t begin = std::min(n, w * chunk);
    const std::size_t end = std::min(n, begin + chunk);
    if (begin < end) pool.emplace_back([&body, begin, end] { body(begin, end); });
  }
  body(std::size_t{0}, std::min(n, chunk));
  for (auto& t : pool) t.join();
}

}  // namespace dose
