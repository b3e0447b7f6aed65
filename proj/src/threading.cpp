#include "omnifht/threading.hpp"

#include <algorithm>
#include <atomic>
#include <thread>
#include <vector>

namespace omnifht {
namespace {
std::atomic<int> g_workers{1};
}

int worker_count() { return g_workers.load(); }

void set_worker_count(int n) { g_workers.store(std::max(1, n)); }

int hardware_thread_count() {
  const unsigned n = std::thread::hardware_concurrency();
  return n == 0 ? 1 : static_cast<int>(n);
}

void parallel_for(std::size_t n,
                  const std::function<void(std::size_t, std::size_t)>& fn) {
  if (n == 0) return;
  const int workers = std::min<std::size_t>(worker_count(), n);
  if (workers <= 1) {
    fn(0, n);
    return;
  }
  const std::size_t block = (n + workers - 1) / workers;
  std::vector<std::thread> threads;
  threads.reserve(workers);
  for (int w = 0; w < workers; ++w) {
    const std::size_t begin = static_cast<std::size_t>(w) * block;
    const std::size_t end = std::min(n, begin + block);
    if (begin >= end) break;
    threads.emplace_back([&fn, begin, end] { fn(begin, end); });
  }
  for (auto& t : threads) t.join();
}

}  // namespace omnifht
