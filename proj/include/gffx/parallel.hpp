#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace gffx {

/// Evaluate fn(i) for i in [0, count) on `workers` threads. Results land at
/// their index, so anything reduced from the returned vector in index order
/// is independent of the worker count. The first exception is rethrown.
template <typename T, typename Fn>
std::vector<T> parallel_map(std::size_t count, std::size_t workers, Fn&& fn) {
  std::vector<T> out(count);
  workers = std::max<std::size_t>(1, std::min(workers, count));
  if (workers == 1) {
    for (std::size_t i = 0; i < count; ++i) out[i] = fn(i);
    return out;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto body = [&] {
    while (true) {
      const std::size_t i = next.fetch_add(1);
      if (i >= count) return;
      try {
        out[i] = fn(i);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
        next = count;
        return;
      }
    }
  };
  {
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(body);
  }
  if (error) std::rethrow_exception(error);
  return out;
}

inline std::size_t default_workers() {
  const auto hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : hw;
}

}  // namespace gffx
