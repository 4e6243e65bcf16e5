#pragma once

#include <algorithm>
#include <thread>
#include <vector>

namespace hlpuf {

/// Runs fn(i) for i in [0, count) on up to `threads` workers. Index i is
/// always handled by worker i % threads, and callers write results into
/// per-index slots, so the reduction order never depends on scheduling.
template <typename Fn>
void parallel_for(long count, int threads, Fn&& fn) {
  const int workers = static_cast<int>(std::clamp<long>(threads, 1, std::max<long>(1, std::min<long>(count, 64))));
  auto run = [&](int w) {
    for (long i = w; i < count; i += workers) fn(i);
  };
  if (workers == 1) {
    run(0);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(workers));
  for (int w = 0; w < workers; ++w) pool.emplace_back(run, w);
  for (auto& t : pool) t.join();
}

}  // namespace hlpuf
