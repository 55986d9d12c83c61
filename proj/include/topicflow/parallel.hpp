#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

namespace topicflow {

// Runs fn(i) for i in [0, n) on at most `max_in_flight` threads and returns
// results in index order.  The first exception by index is rethrown after all
// workers finish.
template <typename Fn>
auto parallel_map(std::size_t n, std::size_t max_in_flight, Fn&& fn) {
  using R = decltype(fn(std::size_t{0}));
  std::vector<R> results(n);
  std::vector<std::exception_ptr> errors(n);
  std::size_t workers = std::max<std::size_t>(1, std::min(max_in_flight, n));
  if (workers == 1) {
    for (std::size_t i = 0; i < n; ++i) results[i] = fn(i);
    return results;
  }
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        results[i] = fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return results;
}

}  // namespace topicflow
