#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "bifrac/error.hpp"

namespace bifrac {

namespace detail {
inline std::atomic<unsigned>& thread_cap_storage() {
  static std::atomic<unsigned> cap{0};
  return cap;
}
}  // namespace detail

/// Upper bound on worker threads used by parallel loops. 0 means "hardware".
inline void set_thread_cap(unsigned n) { detail::thread_cap_storage() = n; }

inline unsigned thread_cap() {
  unsigned cap = detail::thread_cap_storage();
  unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  return cap == 0 ? hw : std::min(cap, hw);
}

/// Runs body(i) for i in [0, n). Iterations must be independent; each index
/// is visited exactly once, so results written per index are deterministic
/// regardless of the thread count.
template <typename Body>
void parallel_for(std::size_t n, Body&& body, std::size_t grain = 1) {
  const std::size_t workers =
      std::min<std::size_t>(thread_cap(), std::max<std::size_t>(1, n / std::max<std::size_t>(1, grain)));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  const std::size_t chunk = std::max<std::size_t>(grain, n / (workers * 8) + 1);
  auto run = [&] {
    try {
      for (;;) {
        std::size_t begin = next.fetch_add(chunk);
        if (begin >= n) break;
        std::size_t end = std::min(n, begin + chunk);
        for (std::size_t i = begin; i < end; ++i) body(i);
      }
    } catch (...) {
      std::lock_guard lock(failure_mutex);
      if (!failure) failure = std::current_exception();
      next = n;
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(workers - 1);
  for (std::size_t t = 1; t < workers; ++t) pool.emplace_back(run);
  run();
  for (auto& th : pool) th.join();
  if (failure) std::rethrow_exception(failure);
}

namespace detail {
inline std::atomic<std::size_t>& budget_storage() {
  static std::atomic<std::size_t> budget{0};
  return budget;
}
}  // namespace detail

/// Process-wide memory cap; 0 restores the default.
inline void set_budget_bytes(std::size_t bytes) { detail::budget_storage() = bytes; }

/// Memory cap for large transient allocations. The BIFRAC_BUDGET_BYTES
/// environment variable wins over set_budget_bytes(), which wins over the
/// 2 GiB default.
inline std::size_t default_budget_bytes() {
  constexpr std::size_t kDefault = std::size_t{2} << 30;
  if (const char* env = std::getenv("BIFRAC_BUDGET_BYTES")) {
    try {
      std::size_t used = 0;
      const auto v = std::stoull(env, &used);
      if (env[used] != '\0') throw Error("");
      return static_cast<std::size_t>(v);
    } catch (const std::exception&) {
      throw Error(std::string("invalid BIFRAC_BUDGET_BYTES: ") + env);
    }
  }
  const std::size_t set = detail::budget_storage();
  return set == 0 ? kDefault : set;
}

}  // namespace bifrac
