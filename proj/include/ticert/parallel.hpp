#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace ticert {

// 0 means "available parallelism".
std::size_t resolve_workers(std::size_t requested);
void set_default_workers(std::size_t workers);
std::size_t default_workers();

// Evaluates fn(i) for i in [0, count) on up to `workers` threads and returns
// the results in index order, so the output never depends on scheduling.
template <typename Fn>
auto parallel_map(std::size_t count, Fn&& fn, std::size_t workers = 0)
    -> std::vector<decltype(fn(std::size_t{}))> {
  using Result = decltype(fn(std::size_t{}));
  std::vector<Result> out(count);
  const std::size_t threads =
      std::min(count, resolve_workers(workers ? workers : default_workers()));
  if (threads <= 1) {
    for (std::size_t i = 0; i < count; ++i) out[i] = fn(i);
    return out;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (std::size_t t = 0; t < threads; ++t) {
    pool.emplace_back([&] {
      for (;;) {
        const std::size_t i = next.fetch_add(1);
        if (i >= count) return;
        try {
          out[i] = fn(i);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!error) error = std::current_exception();
          next.store(count);
          return;
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
  return out;
}

}  // namespace ticert
