#include "heis/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <thread>

#ifdef HEIS_HAVE_OPENMP
#include <omp.h>
#endif

namespace heis::par {

namespace {

int cap_from_env() {
  if (const char* s = std::getenv("HEIS_PLANE_THREADS")) {
    int v = std::atoi(s);
    if (v >= 1) return v;
  }
  return 0;  // no cap
}

std::atomic<int> g_cap{-1};  // -1: not yet resolved

}  // namespace

int max_threads() {
  int cap = g_cap.load();
  if (cap == -1) {
    cap = cap_from_env();
    g_cap.store(cap);
  }
  int hw = static_cast<int>(std::thread::hardware_concurrency());
  if (hw < 1) hw = 1;
  return cap > 0 ? std::min(cap, hw) : hw;
}

void set_max_threads(int n) { g_cap.store(n >= 1 ? n : 0); }

double ordered_map_sum(std::size_t chunks, const std::function<double(std::size_t)>& chunk_fn) {
  std::vector<double> partial(chunks, 0.0);
#ifdef HEIS_HAVE_OPENMP
  const int nt = max_threads();
#pragma omp parallel for schedule(dynamic, 1) num_threads(nt)
  for (long long c = 0; c < static_cast<long long>(chunks); ++c)
    partial[static_cast<std::size_t>(c)] = chunk_fn(static_cast<std::size_t>(c));
#else
  for (std::size_t c = 0; c < chunks; ++c) partial[c] = chunk_fn(c);
#endif
  double s = 0.0;
  for (double v : partial) s += v;
  return s;
}

std::vector<double> ordered_map_sum_multi(std::size_t chunks, std::size_t width,
                                          const std::function<void(std::size_t, double*)>& chunk_fn) {
  std::vector<double> partial(chunks * width, 0.0);
#ifdef HEIS_HAVE_OPENMP
  const int nt = max_threads();
#pragma omp parallel for schedule(dynamic, 1) num_threads(nt)
  for (long long c = 0; c < static_cast<long long>(chunks); ++c)
    chunk_fn(static_cast<std::size_t>(c), partial.data() + static_cast<std::size_t>(c) * width);
#else
  for (std::size_t c = 0; c < chunks; ++c) chunk_fn(c, partial.data() + c * width);
#endif
  std::vector<double> out(width, 0.0);
  for (std::size_t c = 0; c < chunks; ++c)
    for (std::size_t k = 0; k < width; ++k) out[k] += partial[c * width + k];
  return out;
}

}  // namespace heis::par
