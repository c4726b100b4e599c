#include "dose/parallel.hpp"

#include <atomic>

namespace dose {
namespace {

std::size_t default_threads() {
  const auto hc = std::thread::hardware_concurrency();
  return hc == 0 ? 1 : hc;
}

std::atomic<std::size_t> g_threads{default_threads()};

}  // namespace

void set_thread_count(std::size_t n) noexcept { g_threads.store(n == 0 ? 1 : n); }

std::size_t thread_count() noexcept { return g_threads.load(); }

}  // namespace dose
