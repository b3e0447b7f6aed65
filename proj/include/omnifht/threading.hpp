#pragma once

#include <cstddef>
#include <functional>

namespace omnifht {

// Number of worker threads used by parallel_for. Defaults to 1; callers opt
// in to parallelism explicitly so results stay reproducible by default.
int worker_count();
void set_worker_count(int n);
int hardware_thread_count();

// Runs fn over [0, n) split into contiguous blocks, one per worker. The
// partition depends only on n and the worker count, never on scheduling, so
// any per-block accumulation order is deterministic.
void parallel_for(std::size_t n,
                  const std::function<void(std::size_t begin, std::size_t end)>& fn);

}  // namespace omnifht
