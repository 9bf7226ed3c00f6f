#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "heis/kernels.hpp"
#include "heis/reconstruct.hpp"
#include "test_util.hpp"

using namespace heis;
using test::rel_err;

namespace {
const BumpFunction kBump{{2, 0, 0, 0}, 1.0, 1.0};
}

TEST_CASE("bump: values, gradient, exact jets") {
  BumpFunction u{{1, 0, 0, 0}, 2.0, 3.0};
  CHECK(u.value({1, 0, 0, 0}) == 3.0);
  CHECK(u.value({3.5, 0, 0, 0}) == 0.0);
  CHECK(norm(u.gradient({3.5, 0, 0, 0})) == 0.0);
  Rng rng(kDefaultSeed);
  const double h = 1e-6;
  for (int i = 0; i < 300; ++i) {
    Vec4 y = test::random_point(rng, 2.5);
    Jet2 j = u.jet(y);
    CHECK(j.v == u.value(y));
    Vec4 g = u.gradient(y);
    for (int d = 0; d < 4; ++d) {
      CHECK(std::fabs(j.g[d] - g[d]) <= 1e-12 * (1 + std::fabs(g[d])));
      Vec4 yp = y, ym = y;
      yp[d] += h;
      ym[d] -= h;
      double fd = (u.value(yp) - u.value(ym)) / (2 * h);
      CHECK(std::fabs(g[d] - fd) <= 2e-5 * (1 + std::fabs(fd)));
    }
  }
}

TEST_CASE("reconstruction at the pole-centered configuration") {
  QuadratureSpec spec;
  spec.budget = 1.6e6;
  auto r = reconstruct(kBump, {2, 0, 0, 0}, spec);
  CHECK(r.target == 1.0);
  CHECK(std::fabs(r.reconstructed - 1.0) <= 0.02);
  CHECK(r.reconstructed == r.term_gradient + r.term_zero_order);
}

TEST_CASE("reconstruction off-center and at a rotated pole") {
  QuadratureSpec spec;
  spec.budget = 1.6e6;
  for (Vec4 z : {Vec4{2.5, 0.3, 0, 0}, Vec4{2.05, 0.35, 0.2, -0.15}}) {
    auto r = reconstruct(kBump, z, spec);
    CHECK(r.target > 0.1);
    CHECK(std::fabs(r.reconstructed - r.target) <= 0.02);
  }
}

TEST_CASE("reconstruction vanishes for poles outside the support") {
  QuadratureSpec spec;
  spec.budget = 8e5;
  auto near = reconstruct(kBump, {3.2, 0, 0, 0}, spec);
  CHECK(std::fabs(near.reconstructed) <= 5e-3);
  // far pole: everything is tiny already at a small budget
  QuadratureSpec small = spec;
  small.budget = 3e5;
  auto far = reconstruct(kBump, {6, 0, 0, 0}, small);
  CHECK(std::fabs(far.reconstructed) <= 1e-3);
}

TEST_CASE("characteristic pole: gradient term alone, matches u(0) = 0") {
  QuadratureSpec spec;
  spec.budget = 8e5;
  auto r = reconstruct(kBump, {0, 0, 0, 0}, spec);
  CHECK(r.term_zero_order == 0.0);
  CHECK(std::fabs(r.reconstructed) <= 5e-3);
}

TEST_CASE("rotation covariance of the reconstruction") {
  // the general-pole path factors through the axis problem, so the rotated
  // equivalent must reproduce the same report
  QuadratureSpec spec;
  spec.budget = 4e5;
  Vec4 z{1.2, 1.0, 0.5, 0.3};
  BumpFunction u{{1.5, 0.8, 0.4, 0.1}, 0.9, 2.0};
  auto r = reconstruct(u, z, spec);
  CanonicalPair cp = canonicalize(z);
  BumpFunction u_rot{cp.pull_back(u.center), u.radius, u.amplitude};
  auto r_ax = reconstruct(u_rot, {cp.z1, 0, 0, 0}, spec);
  CHECK(std::fabs(r.reconstructed - r_ax.reconstructed) <= 1e-12);
  CHECK(std::fabs(r.target - r_ax.target) <= 1e-12);
}

TEST_CASE("budget doubling drives the reconstruction error down") {
  // each doubling cuts the error to at most 0.8x, unless it already sits
  // below the accuracy floor 1e-3 (the cubature converges faster than first
  // order, so sub-halving steps and floor wobbles are expected)
  Vec4 z{2.5, 0.3, 0, 0};
  double prev = -1;
  for (double b : {1e5, 2e5, 4e5, 8e5}) {
    QuadratureSpec spec;
    spec.budget = b;
    auto r = reconstruct(kBump, z, spec);
    double err = std::fabs(r.reconstructed - r.target);
    if (prev >= 0) CHECK((err <= 0.8 * prev || err <= 1e-3));
    prev = err;
  }
}

TEST_CASE("weak-form residual") {
  QuadratureSpec spec;
  spec.budget = 1.6e6;
  CHECK(solfond_check(kBump, {2, 0, 0, 0}, spec) <= 0.02);
  CHECK(solfond_check(kBump, {2.5, 0.3, 0, 0}, spec) <= 0.02);
  CHECK_THROWS_AS(solfond_check(kBump, {0, 0, 0, 0}, spec), DegeneratePoint);
  // zero test function: residual is exactly the target 0
  BumpFunction zero{{2, 0, 0, 0}, 1.0, 0.0};
  CHECK(solfond_check(zero, {2, 0, 0, 0}, spec) == 0.0);
}

TEST_CASE("weak form and rewritten form agree at matched budgets") {
  QuadratureSpec spec;
  spec.budget = 1.6e6;
  Vec4 z{2.3, 0.2, 0.1, 0};
  auto r = reconstruct(kBump, z, spec);
  double rewritten = std::fabs(r.reconstructed - r.target);
  double weak = solfond_check(kBump, z, spec);
  CHECK(std::fabs(rewritten - weak) <= 5e-3);
}

TEST_CASE("limit study along a pole sequence shrinking to 0") {
  BumpFunction u{{2, 0, 0, 0}, 1.0, 1.0};
  std::vector<PlanePoint> zs;
  for (int k = 1; k <= 6; ++k) zs.push_back({std::pow(2.0, -k), 0, 0, 0});
  QuadratureSpec spec;
  spec.budget = 4e5;
  LimitStudy st = limit_study(u, zs, spec);
  REQUIRE(st.entries.size() == 6);
  for (std::size_t i = 1; i < st.entries.size(); ++i) {
    CHECK(std::fabs(st.entries[i].k0_term.value) <=
          std::fabs(st.entries[i - 1].k0_term.value) * (1 + 1e-6));
    CHECK(std::fabs(st.entries[i].f_term.value) <=
          std::fabs(st.entries[i - 1].f_term.value) * (1 + 1e-6));
  }
  // the kernel-gradient sum tends to the (vanishing) limit target
  CHECK(std::fabs(st.target_weight_y) <= 1e-12);
  CHECK(std::fabs(st.target_weight_y_sq) <= 1e-12);
  double last = std::fabs(st.entries.back().k_sum.value);
  CHECK(last <= std::fabs(st.entries.front().k_sum.value) + 1e-9);
  CHECK(last <= 1e-4);
}
