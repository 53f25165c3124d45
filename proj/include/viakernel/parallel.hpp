#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

namespace viakernel {

/// Splits [0, count) into at most `threads` contiguous chunks and runs
/// fn(chunk, begin, end) for each. Chunk boundaries depend only on
/// (count, threads), so per-chunk results can be merged deterministically.
/// The first exception thrown by any worker is rethrown on the caller.
template <class Fn>
void parallel_chunks(std::size_t count, unsigned threads, Fn&& fn) {
  const std::size_t workers =
      std::max<std::size_t>(1, std::min<std::size_t>(threads == 0 ? 1 : threads, count));
  if (workers <= 1) {
    fn(std::size_t{0}, std::size_t{0}, count);
    return;
  }
  const std::size_t per = (count + workers - 1) / workers;
  std::vector<std::exception_ptr> errors(workers);
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    const std::size_t begin = std::min(count, w * per);
    const std::size_t end = std::min(count, begin + per);
    pool.emplace_back([&, w, begin, end] {
      try {
        fn(w, begin, end);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

inline std::size_t chunk_count(std::size_t count, unsigned threads) {
  return std::max<std::size_t>(1, std::min<std::size_t>(threads == 0 ? 1 : threads, count));
}

}  // namespace viakernel
