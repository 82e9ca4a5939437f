#include "metagen/parallel.hpp"

#include <atomic>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace metagen {

namespace {
std::atomic<bool> g_parallel{true};
}

void set_parallel_enabled(bool enabled) { g_parallel.store(enabled); }

bool parallel_enabled() { return g_parallel.load(); }

void set_thread_count(int threads) {
#ifdef _OPENMP
  if (threads > 0) omp_set_num_threads(threads);
#else
  (void)threads;
#endif
}

namespace detail {

void parallel_for_impl(std::size_t count, void* ctx, void (*fn)(void*, std::size_t)) {
#ifdef _OPENMP
  if (g_parallel.load() && count > 1) {
    // dynamic schedule: cell workloads are uneven (enumeration vs Monte Carlo)
#pragma omp parallel for schedule(dynamic)
    for (long long i = 0; i < static_cast<long long>(count); ++i) {
      fn(ctx, static_cast<std::size_t>(i));
    }
    return;
  }
#endif
  for (std::size_t i = 0; i < count; ++i) fn(ctx, i);
}

}  // namespace detail
}  // namespace metagen
