#pragma once

#include <cstdlib>
#include <thread>

#ifdef GRIDSTART_HAS_OPENMP
#include <omp.h>
#endif

namespace gridstart {

// Worker count: hardware concurrency capped by GRIDSTART_THREADS.
inline int worker_count() {
  int n = static_cast<int>(std::thread::hardware_concurrency());
  if (n < 1) n = 1;
  if (const char* env = std::getenv("GRIDSTART_THREADS")) {
    int cap = std::atoi(env);
    if (cap >= 1 && cap < n) n = cap;
  }
  return n;
}

// Serial reference for the parallel kernels; kept for equivalence tests.
template <typename Fn>
void serial_for(int n, Fn&& fn) {
  for (int i = 0; i < n; ++i) fn(i);
}

// Deterministic fan-out: fn(i) must write only to index-i slots so the
// merged result is independent of scheduling.
template <typename Fn>
void parallel_for(int n, Fn&& fn) {
#ifdef GRIDSTART_HAS_OPENMP
  const int workers = worker_count();
  if (workers > 1 && n > 1) {
#pragma omp parallel for schedule(static) num_threads(workers)
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
#endif
  serial_for(n, fn);
}

}  // namespace gridstart
