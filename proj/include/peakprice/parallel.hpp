#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace peakprice {

/// Calls fn(begin, end, chunk) for fixed-size chunks of [0, n) on up to
/// `threads` workers. Chunk boundaries depend only on n and chunk_size, so a
/// caller that reduces per-chunk results in chunk order gets the same answer
/// for any thread count.
template <typename Fn>
void parallel_chunks(std::size_t n, std::size_t chunk_size, unsigned threads, Fn&& fn) {
  if (n == 0) return;
  chunk_size = std::max<std::size_t>(1, chunk_size);
  const std::size_t chunks = (n + chunk_size - 1) / chunk_size;
  const unsigned workers =
      static_cast<unsigned>(std::min<std::size_t>(std::max(1u, threads), chunks));

  auto run = [&](std::size_t c) {
    const std::size_t begin = c * chunk_size;
    fn(begin, std::min(n, begin + chunk_size), c);
  };
  if (workers == 1) {
    for (std::size_t c = 0; c < chunks; ++c) run(c);
    return;
  }

  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t c = next++; c < chunks; c = next++) {
        try {
          run(c);
        } catch (...) {
          std::lock_guard<std::mutex> lock(failure_mutex);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

inline unsigned default_thread_count() { return std::max(1u, std::thread::hardware_concurrency()); }

}  // namespace peakprice
