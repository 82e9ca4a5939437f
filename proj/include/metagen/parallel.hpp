#pragma once

#include <cstddef>
#include <vector>

namespace metagen {

// Process-wide switch between the OpenMP kernels and the serial reference.
// Every parallel loop writes into a slot owned by its index and results are
// reduced afterwards in index order, so both modes produce identical bytes;
// the tests assert that and the benchmark measures the difference.
void set_parallel_enabled(bool enabled);
bool parallel_enabled();

// Thread count hint for the OpenMP mode (0 = library default).
void set_thread_count(int threads);

namespace detail {
void parallel_for_impl(std::size_t count, void* ctx, void (*fn)(void*, std::size_t));
}

// fn(i) is called exactly once for each i in [0, count); fn must only touch
// state owned by index i.
template <typename F>
void parallel_for(std::size_t count, F&& fn) {
  auto thunk = [](void* ctx, std::size_t i) { (*static_cast<F*>(ctx))(i); };
  detail::parallel_for_impl(count, &fn, thunk);
}

// Map i -> double over [0, count) into a preallocated vector.
template <typename F>
std::vector<double> parallel_map(std::size_t count, F&& fn) {
  std::vector<double> out(count);
  parallel_for(count, [&](std::size_t i) { out[i] = fn(i); });
  return out;
}

}  // namespace metagen
