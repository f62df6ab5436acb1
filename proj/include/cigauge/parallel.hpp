#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace cigauge {

// Process-wide worker cap. Initialized from CI_GAUGE_THREADS when set,
// otherwise from the hardware concurrency.
unsigned thread_limit();
void set_thread_limit(unsigned threads);

namespace detail {
// True on threads started by parallel_for; nested loops run inline there.
inline thread_local bool in_worker = false;
}  // namespace detail

// Calls fn(i) for every i in [0, count), spreading contiguous index blocks
// across at most thread_limit() workers. fn must only write to storage owned
// by index i; callers reduce afterwards in index order, so results never
// depend on the worker count.
template <class Fn>
void parallel_for(std::size_t count, Fn&& fn) {
  const std::size_t workers =
      std::min<std::size_t>(std::max(1u, thread_limit()), count);
  if (workers <= 1 || detail::in_worker) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  const std::size_t block = (count + workers - 1) / workers;
  for (std::size_t w = 0; w < workers; ++w) {
    const std::size_t begin = w * block;
    const std::size_t end = std::min(count, begin + block);
    if (begin >= end) break;
    pool.emplace_back([&, begin, end] {
      detail::in_worker = true;
      try {
        for (std::size_t i = begin; i < end; ++i) fn(i);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

}  // namespace cigauge
