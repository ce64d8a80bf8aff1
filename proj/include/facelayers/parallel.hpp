#pragma once

#include <algorithm>
#include <cstdlib>
#include <string>
#include <thread>
#include <vector>

namespace facelayers {

namespace detail {
inline int& thread_override() {
  static int n = 0;
  return n;
}
}  // namespace detail

// Number of worker threads for per-row loops. FACELAYERS_THREADS caps it;
// set_thread_count() overrides the environment (0 restores it).
inline int thread_count() {
  if (detail::thread_override() > 0) return detail::thread_override();
  if (const char* env = std::getenv("FACELAYERS_THREADS")) {
    int n = std::atoi(env);
    if (n > 0) return n;
  }
  return 1;
}

inline void set_thread_count(int n) { detail::thread_override() = std::max(0, n); }

// Calls fn(row) for every row in [0, rows). Rows are split into contiguous
// blocks; fn must only write state owned by its row.
template <typename Fn>
void parallel_rows(int rows, Fn&& fn) {
  const int workers = std::min(thread_count(), rows);
  if (workers <= 1) {
    for (int r = 0; r < rows; ++r) fn(r);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(workers - 1);
  const int block = (rows + workers - 1) / workers;
  for (int w = 1; w < workers; ++w) {
    const int begin = w * block;
    const int end = std::min(rows, begin + block);
    if (begin >= end) break;
    pool.emplace_back([&fn, begin, end] {
      for (int r = begin; r < end; ++r) fn(r);
    });
  }
  for (int r = 0; r < std::min(rows, block); ++r) fn(r);
  for (auto& t : pool) t.join();
}

// Sum of fn(row) over all rows. Partial sums are kept per row and added in
// row order, so the result does not depend on the thread count.
template <typename Fn>
double sum_rows(int rows, Fn&& fn) {
  std::vector<double> partial(static_cast<std::size_t>(std::max(rows, 0)), 0.0);
  parallel_rows(rows, [&](int r) { partial[static_cast<std::size_t>(r)] = fn(r); });
  double total = 0.0;
  for (double p : partial) total += p;
  return total;
}

}  // namespace facelayers
