#ifndef HEIS_PARALLEL_HPP
#define HEIS_PARALLEL_HPP

#include <cstddef>
#include <functional>
#include <vector>

namespace heis::par {

// Worker cap: min(HEIS_PLANE_THREADS, hardware). 1 disables parallelism.
int max_threads();
void set_max_threads(int n);

// Evaluates chunk_fn(c) for c in [0, chunks), possibly in parallel, and sums
// the results in chunk order. The summation order is fixed, so the result is
// bitwise independent of the thread count.
double ordered_map_sum(std::size_t chunks, const std::function<double(std::size_t)>& chunk_fn);

// Same, but each chunk produces a small vector of accumulators (summed
// componentwise in chunk order).
std::vector<double> ordered_map_sum_multi(std::size_t chunks, std::size_t width,
                                          const std::function<void(std::size_t, double*)>& chunk_fn);

}  // namespace heis::par

#endif
