#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace lsw {

/// Runs body(i) for i in [0, count) over `threads` workers using contiguous
/// static blocks. Callers write results into per-index slots and reduce
/// afterwards in index order, so output never depends on the thread count.
template <class Body>
void parallel_for(std::size_t count, unsigned threads, Body&& body) {
  const std::size_t workers =
      std::min<std::size_t>(std::max(1u, threads), count);
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) body(i);
    return;
  }
  std::exception_ptr failure;
  std::mutex failure_mutex;
  {
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    const std::size_t block = (count + workers - 1) / workers;
    for (std::size_t w = 0; w < workers; ++w) {
      const std::size_t begin = w * block;
      const std::size_t end = std::min(count, begin + block);
      if (begin >= end) break;
      pool.emplace_back([&, begin, end] {
        try {
          for (std::size_t i = begin; i < end; ++i) body(i);
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
        }
      });
    }
  }
  if (failure) std::rethrow_exception(failure);
}

}  // namespace lsw
