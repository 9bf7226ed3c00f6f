// Timing comparison of the parallel kernels against their serial references.

#include <chrono>
#include <cstdio>

#include "heis/parallel.hpp"
#include "heis/quadrature.hpp"
#include "heis/reconstruct.hpp"

using namespace heis;

namespace {

template <class F>
double time_it(F&& f) {
  auto t0 = std::chrono::steady_clock::now();
  f();
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

int main() {
  std::printf("%-28s %10s %10s %8s\n", "kernel", "serial[s]", "parallel[s]", "speedup");

  {
    QuadratureSpec spec;
    spec.budget = 2e6;
    double v1 = 0, v2 = 0;
    double ts = time_it([&] {
      par::set_max_threads(1);
      v1 = mu_ball({1, 0, 0, 0}, 0.7, spec).value;
    });
    double tp = time_it([&] {
      par::set_max_threads(0);
      v2 = mu_ball({1, 0, 0, 0}, 0.7, spec).value;
    });
    std::printf("%-28s %10.3f %10.3f %7.2fx  (bitsame=%s)\n", "ball volume (slab rule)", ts, tp,
                ts / tp, v1 == v2 ? "yes" : "no");
  }
  {
    QuadratureSpec spec;
    spec.budget = 2e6;
    double v1 = 0, v2 = 0;
    double ts = time_it([&] {
      par::set_max_threads(1);
      v1 = flux({1, 0, 0, 0}, 0.05, spec).value;
    });
    double tp = time_it([&] {
      par::set_max_threads(0);
      v2 = flux({1, 0, 0, 0}, 0.05, spec).value;
    });
    std::printf("%-28s %10.3f %10.3f %7.2fx  (bitsame=%s)\n", "small-sphere flux", ts, tp, ts / tp,
                v1 == v2 ? "yes" : "no");
  }
  {
    BumpFunction u{{2, 0, 0, 0}, 1.0, 1.0};
    QuadratureSpec spec;
    spec.budget = 1.6e6;
    double v1 = 0, v2 = 0;
    double ts = time_it([&] {
      par::set_max_threads(1);
      v1 = reconstruct(u, {2.5, 0.3, 0, 0}, spec).reconstructed;
    });
    double tp = time_it([&] {
      par::set_max_threads(0);
      v2 = reconstruct(u, {2.5, 0.3, 0, 0}, spec).reconstructed;
    });
    std::printf("%-28s %10.3f %10.3f %7.2fx  (bitsame=%s)\n", "reconstruction (adaptive)", ts, tp,
                ts / tp, v1 == v2 ? "yes" : "no");
  }
  {
    BumpFunction u{{1.5, 0.2, -0.3, 0.4}, 1.1, 1.0};
    MultiIntegrand m;
    m.components = 1;
    m.support_center = u.center;
    m.support_radius = u.radius;
    m.eval = [&u](const Vec4& y, double* out) { out[0] = u.value(y); };
    QuadratureSpec spec;
    spec.method = Method::MonteCarlo;
    spec.budget = 8e6;
    double v1 = 0, v2 = 0;
    double ts = time_it([&] {
      par::set_max_threads(1);
      v1 = integrate_mu(m, {}, spec).value;
    });
    double tp = time_it([&] {
      par::set_max_threads(0);
      v2 = integrate_mu(m, {}, spec).value;
    });
    std::printf("%-28s %10.3f %10.3f %7.2fx  (bitsame=%s)\n", "Monte Carlo (chunked)", ts, tp,
                ts / tp, v1 == v2 ? "yes" : "no");
  }
  {
    // plain midpoint references at matched accuracy scale
    double ts = time_it([&] { reference::mu_ball({1, 0, 0, 0}, 0.7, 40); });
    double tp = time_it([&] {
      QuadratureSpec spec;
      spec.budget = 2e6;
      mu_ball({1, 0, 0, 0}, 0.7, spec);
    });
    std::printf("%-28s %10.3f %10.3f %7.2fx\n", "midpoint ref vs slab rule", ts, tp, ts / tp);
  }
  par::set_max_threads(0);
  return 0;
}
