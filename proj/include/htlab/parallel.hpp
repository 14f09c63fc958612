#pragma once

#include <condition_variable>
#include <cstdlib>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace htlab {

inline int worker_count() {
  if (const char* env = std::getenv("HTLAB_WORKERS")) {
    int n = std::atoi(env);
    if (n >= 1) return n;
  }
  unsigned hw = std::thread::hardware_concurrency();
  return hw ? int(hw) : 1;
}

/// Run `work(chunk)` for chunk = 0..n_chunks-1 on a pool, then hand each
/// chunk to `merge(chunk)` in strictly increasing chunk order. Results are
/// bit-identical regardless of the worker count: the merge order is fixed
/// and each chunk's arithmetic is self-contained.
inline void ordered_chunks(int n_chunks, const std::function<void(int)>& work,
                           const std::function<void(int)>& merge, int workers = 0) {
  if (workers <= 0) workers = worker_count();
  if (workers == 1 || n_chunks <= 1) {
    for (int c = 0; c < n_chunks; ++c) {
      work(c);
      merge(c);
    }
    return;
  }
  std::mutex m;
  std::condition_variable cv;
  int next_claim = 0;
  int next_merge = 0;
  std::vector<char> done(n_chunks, 0);
  auto runner = [&]() {
    for (;;) {
      int c;
      {
        std::lock_guard<std::mutex> lock(m);
        if (next_claim >= n_chunks) return;
        c = next_claim++;
      }
      work(c);
      {
        std::unique_lock<std::mutex> lock(m);
        done[c] = 1;
        while (next_merge < n_chunks && done[next_merge]) {
          merge(next_merge);
          ++next_merge;
        }
        cv.notify_all();
      }
    }
  };
  std::vector<std::thread> pool;
  for (int w = 0; w < workers; ++w) pool.emplace_back(runner);
  for (auto& t : pool) t.join();
  // any chunks finished but unmerged (all workers exited between)
  for (; next_merge < n_chunks; ++next_merge) merge(next_merge);
}

}  // namespace htlab
