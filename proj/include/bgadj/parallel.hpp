#pragma once

// Deterministic data-parallel helper. Work is split into fixed-size
// chunks whose boundaries depend only on the item count, never on the
// worker count; callers index any partial results by chunk so the
// combined output is bit-identical for any number of threads.

#include <atomic>
#include <cstdlib>
#include <string>
#include <thread>
#include <vector>

namespace bgadj {

/// Worker count: `requested` if positive, else the BGADJ_THREADS
/// environment variable, else hardware concurrency.
inline int resolve_threads(int requested = 0) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("BGADJ_THREADS")) {
    const int v = std::atoi(env);
    if (v > 0) return v;
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? static_cast<int>(hw) : 1;
}

inline std::size_t chunk_count(std::size_t n, std::size_t chunk_size) {
  return (n + chunk_size - 1) / chunk_size;
}

/// Runs fn(chunk_index, begin, end) over [0, n) split into chunks of
/// `chunk_size`. Chunk boundaries are independent of `threads`.
template <class F>
void parallel_chunks(std::size_t n, std::size_t chunk_size, int threads, F&& fn) {
  if (n == 0) return;
  const std::size_t nchunks = chunk_count(n, chunk_size);
  const int nthreads = std::min<std::size_t>(resolve_threads(threads), nchunks);
  if (nthreads <= 1) {
    for (std::size_t c = 0; c < nchunks; ++c)
      fn(c, c * chunk_size, std::min(n, (c + 1) * chunk_size));
    return;
  }
  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (;;) {
      const std::size_t c = next.fetch_add(1);
      if (c >= nchunks) return;
      fn(c, c * chunk_size, std::min(n, (c + 1) * chunk_size));
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(nthreads - 1);
  for (int t = 1; t < nthreads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();
}

}  // namespace bgadj
