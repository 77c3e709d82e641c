#include "pafnucy/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <thread>
#include <vector>

namespace pafnucy {
namespace {

std::atomic<int> g_max_threads{0};

int effective_threads() {
  const int cap = g_max_threads.load();
  int hw = static_cast<int>(std::thread::hardware_concurrency());
  if (hw <= 0) hw = 1;
  return cap > 0 ? std::min(cap, hw) : hw;
}

}  // namespace

void set_max_threads(int n) { g_max_threads.store(n < 0 ? 0 : n); }

int max_threads() { return effective_threads(); }

void parallel_for(int64_t n, int64_t work,
                  const std::function<void(int64_t, int64_t)>& fn) {
  if (n <= 0) return;
  const int threads = effective_threads();
  if (threads <= 1 || n < 2 || work < (1 << 16)) {
    fn(0, n);
    return;
  }
  const int workers = static_cast<int>(std::min<int64_t>(threads, n));
  const int64_t chunk = (n + workers - 1) / workers;
  std::vector<std::thread> pool;
  pool.reserve(static_cast<size_t>(workers));
  for (int w = 0; w < workers; ++w) {
    const int64_t begin = w * chunk;
    const int64_t end = std::min<int64_t>(begin + chunk, n);
    if (begin >= end) break;
    pool.emplace_back([&fn, begin, end] { fn(begin, end); });
  }
  for (auto& t : pool) t.join();
}

}  // namespace pafnucy
