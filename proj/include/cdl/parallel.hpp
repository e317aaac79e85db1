#ifndef CDL_PARALLEL_HPP
#define CDL_PARALLEL_HPP

#include <algorithm>
#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

namespace cdl {

inline int resolve_workers(int requested) {
  if (requested > 0) return requested;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

/// Splits [0, n) into contiguous chunks, one per worker, and calls
/// fn(begin, end) for each. Chunks write disjoint outputs, so results do not
/// depend on the worker count.
template <class Fn>
void parallel_for(std::ptrdiff_t n, int workers, Fn&& fn) {
  if (n <= 0) return;
  const std::ptrdiff_t w = std::min<std::ptrdiff_t>(resolve_workers(workers), n);
  if (w <= 1) {
    fn(std::ptrdiff_t{0}, n);
    return;
  }
  std::vector<std::thread> threads;
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(w));
  threads.reserve(static_cast<std::size_t>(w));
  const std::ptrdiff_t chunk = (n + w - 1) / w;
  for (std::ptrdiff_t t = 0; t < w; ++t) {
    const std::ptrdiff_t begin = t * chunk;
    const std::ptrdiff_t end = std::min(n, begin + chunk);
    if (begin >= end) break;
    threads.emplace_back([&, t, begin, end] {
      try {
        fn(begin, end);
      } catch (...) {
        errors[static_cast<std::size_t>(t)] = std::current_exception();
      }
    });
  }
  for (auto& th : threads) th.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace cdl

#endif  // CDL_PARALLEL_HPP
