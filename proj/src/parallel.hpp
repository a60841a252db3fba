#pragma once

#include <algorithm>
#include <cstdint>
#include <thread>
#include <vector>

namespace bintopk::detail {

// Runs fn(row_begin, row_end) on contiguous row chunks, one per worker.
// threads == 0 uses the hardware count. fn must not throw.
template <class Fn>
void parallel_rows(std::int64_t rows, int threads, Fn&& fn) {
  const int want = threads > 0
                       ? threads
                       : static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  const int t = static_cast<int>(std::min<std::int64_t>(want, rows));
  if (t <= 1) {
    fn(std::int64_t{0}, rows);
    return;
  }
  const std::int64_t chunk = (rows + t - 1) / t;
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(t));
  for (int w = 0; w < t; ++w) {
    const std::int64_t r0 = std::min<std::int64_t>(w * chunk, rows);
    const std::int64_t r1 = std::min<std::int64_t>(r0 + chunk, rows);
    if (r0 >= r1) break;
    pool.emplace_back([&fn, r0, r1] { fn(r0, r1); });
  }
  for (auto& th : pool) th.join();
}

}  // namespace bintopk::detail
