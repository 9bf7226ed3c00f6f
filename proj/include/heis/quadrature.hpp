#ifndef HEIS_QUADRATURE_HPP
#define HEIS_QUADRATURE_HPP

#include <cstdint>
#include <functional>
#include <memory>
#include <vector>

#include "heis/jets.hpp"
#include "heis/rng.hpp"
#include "heis/vec.hpp"

// Integration against the plane measure |y| dy (and plain Lebesgue measure),
// with excision and extrapolation around declared singular points; the
// moment-constant computation; metric ball volumes; the small-sphere flux;
// and the weak integration-by-parts identities.

namespace heis {

enum class Method { MonteCarlo, AdaptiveProduct };

struct QuadratureSpec {
  Method method = Method::AdaptiveProduct;
  double budget = 4.0e5;  // integrand evaluations (adaptive) or samples (MC)
  std::uint64_t seed = kDefaultSeed;
  // Finest excision radius around singular points without an explicit one.
  // 0 selects 0.02 * support radius. With budget_coupled_exclusion the
  // radius shrinks like budget^(-1/4) relative to reference_budget so the
  // excision error keeps pace with the quadrature error.
  double exclusion = 0.0;
  bool budget_coupled_exclusion = true;
  double reference_budget = 4.0e5;
  double support_radius = 0.0;  // 0: take from the integrand
  double tolerance = 0.0;       // >0: throw BudgetExhausted if not reached
};

struct IntegralEstimate {
  double value = 0.0;
  double error_indicator = 0.0;
  long long samples_used = 0;
};

// A point the integrand blows up at. exclusion 0 falls back to the QuadratureSpec default.
struct Singularity {
  Vec4 p{0, 0, 0, 0};
  double exclusion = 0.0;
};

// A bundle of integrands sharing one support ball and one set of sample
// points / cells. The evaluator writes `components` values per point and
// must vanish outside the support ball.
struct MultiIntegrand {
  std::function<void(const Vec4&, double*)> eval;
  std::size_t components = 1;
  Vec4 support_center{0, 0, 0, 0};
  double support_radius = 0.0;
};

enum class Weight { PlaneMeasure, Lebesgue };

std::vector<IntegralEstimate> integrate_multi(const MultiIntegrand& f, Weight w,
                                              const std::vector<Singularity>& singularities,
                                              const QuadratureSpec& spec);

// Scalar conveniences; the ScalarField overload integrates the field's value
// against |y| dy over its declared support.
IntegralEstimate integrate_mu(const ScalarField& f, const std::vector<Singularity>& singularities,
                              const QuadratureSpec& spec);
IntegralEstimate integrate_mu(const MultiIntegrand& f, const std::vector<Singularity>& singularities,
                              const QuadratureSpec& spec);
IntegralEstimate integrate_lebesgue(const MultiIntegrand& f,
                                    const std::vector<Singularity>& singularities,
                                    const QuadratureSpec& spec);

// Fixed-tree evaluation: build the cell tree from one integrand, then
// integrate others on exactly that tree (linearity in the integrand holds to
// rounding on a shared tree).
struct CellTree {
  std::vector<std::pair<Vec4, Vec4>> leaves;
  Vec4 support_center;
  double support_radius;
};
std::shared_ptr<const CellTree> build_tree(const MultiIntegrand& f, Weight w,
                                           const QuadratureSpec& spec);
double integrate_on_tree(const CellTree& tree, Weight w,
                         const std::function<double(const Vec4&)>& f);

// mu(B(c, r)) by a product rule adapted to the ball's slab geometry
// (rotation-invariant, so the center is first rotated onto the axis).
IntegralEstimate mu_ball(const PlanePoint& c, double r, const QuadratureSpec& spec);

// The moment integral 21 * int_{(x1^2+x2^2+x4^2)^2+x3^2<=1} (x1^2+x2^2+x4^2) dx
// by the requested method. Closed form: 42*pi*B(5/4,3/2).
IntegralEstimate compute_constant(const QuadratureSpec& spec);
double compute_constant_closed_form();

// Volume form of the small-sphere flux:
//   I(eps) = -(3/(4C)) eps^-7 int_{d(z,y)<=eps}
//            (sum_i T_i^2 d^4 + 3 T_1 d^4 + T_{4,y-z}^2 d^4) dy/|y|,
// which tends to -1 as eps -> 0.
IntegralEstimate flux(const PlanePoint& z, double eps, const QuadratureSpec& spec);

// Residual of one integration-by-parts identity, normalized by the largest
// constituent term.
enum class WeakIdentity {
  AdjointZ1,
  AdjointZ2,
  AdjointZ3,
  AdjointZ4,
  RewriteDirect,   // Z_{4,y-z} moved off the first factor
  RewriteAdjoint,  // same identity in adjoint form
};
double weak_identity_residual(WeakIdentity id, const ScalarField& f, const ScalarField& g,
                              const PlanePoint& z, const QuadratureSpec& spec);

// log-log least-squares slope of r -> mu(B(c, r)) over the given radii.
double ball_growth_slope(const PlanePoint& c, const std::vector<double>& radii,
                         const QuadratureSpec& spec);

// Plain single-threaded midpoint-rule references for the slab-domain
// integrals. Slow and simple; kept as the comparison baseline for the
// parallel implementations (tests assert agreement, the bench tool compares
// timings).
namespace reference {
double mu_ball(const PlanePoint& c, double r, int resolution);
double flux(const PlanePoint& z, double eps, int resolution);
}  // namespace reference

}  // namespace heis

#endif
