#ifndef HEIS_JETS_HPP
#define HEIS_JETS_HPP

#include <array>
#include <cmath>
#include <functional>

#include "heis/errors.hpp"
#include "heis/plane_geom.hpp"
#include "heis/vec.hpp"

// Second-order forward differentiation on R^4 and the application of the
// plane's frame operators to scalar fields. The frame coefficients are linear
// in position, so two jet orders are enough for every operator built here.

namespace heis {

// Upper-triangle index for a symmetric 4x4, i <= j.
constexpr int hess_index(int i, int j) {
  return i <= j ? i * 4 + j - i * (i + 1) / 2 : j * 4 + i - j * (j + 1) / 2;
}

// Value, gradient and symmetric Hessian of a scalar expression at a point.
struct Jet2 {
  double v = 0.0;
  Vec4 g{0, 0, 0, 0};
  std::array<double, 10> h{};

  double hess(int i, int j) const { return h[hess_index(i, j)]; }

  static Jet2 constant(double c) {
    Jet2 j;
    j.v = c;
    return j;
  }
  static Jet2 variable(double x, int index) {
    Jet2 j;
    j.v = x;
    j.g[index] = 1.0;
    return j;
  }
};

inline Jet2 operator+(const Jet2& a, const Jet2& b) {
  Jet2 r;
  r.v = a.v + b.v;
  for (int i = 0; i < 4; ++i) r.g[i] = a.g[i] + b.g[i];
  for (int i = 0; i < 10; ++i) r.h[i] = a.h[i] + b.h[i];
  return r;
}
inline Jet2 operator-(const Jet2& a, const Jet2& b) {
  Jet2 r;
  r.v = a.v - b.v;
  for (int i = 0; i < 4; ++i) r.g[i] = a.g[i] - b.g[i];
  for (int i = 0; i < 10; ++i) r.h[i] = a.h[i] - b.h[i];
  return r;
}
inline Jet2 operator-(const Jet2& a) {
  Jet2 r;
  r.v = -a.v;
  for (int i = 0; i < 4; ++i) r.g[i] = -a.g[i];
  for (int i = 0; i < 10; ++i) r.h[i] = -a.h[i];
  return r;
}
inline Jet2 operator*(const Jet2& a, const Jet2& b) {
  Jet2 r;
  r.v = a.v * b.v;
  for (int i = 0; i < 4; ++i) r.g[i] = a.g[i] * b.v + a.v * b.g[i];
  for (int i = 0; i < 4; ++i)
    for (int j = i; j < 4; ++j)
      r.h[hess_index(i, j)] = a.hess(i, j) * b.v + a.g[i] * b.g[j] + a.g[j] * b.g[i] + a.v * b.hess(i, j);
  return r;
}
inline Jet2 operator+(const Jet2& a, double c) { return a + Jet2::constant(c); }
inline Jet2 operator+(double c, const Jet2& a) { return a + Jet2::constant(c); }
inline Jet2 operator-(const Jet2& a, double c) { return a - Jet2::constant(c); }
inline Jet2 operator-(double c, const Jet2& a) { return Jet2::constant(c) - a; }
inline Jet2 operator*(double c, const Jet2& a) {
  Jet2 r;
  r.v = c * a.v;
  for (int i = 0; i < 4; ++i) r.g[i] = c * a.g[i];
  for (int i = 0; i < 10; ++i) r.h[i] = c * a.h[i];
  return r;
}
inline Jet2 operator*(const Jet2& a, double c) { return c * a; }

// F(u) for univariate F with supplied first and second derivatives at u.v.
inline Jet2 compose1(const Jet2& u, double f, double fp, double fpp) {
  Jet2 r;
  r.v = f;
  for (int i = 0; i < 4; ++i) r.g[i] = fp * u.g[i];
  for (int i = 0; i < 4; ++i)
    for (int j = i; j < 4; ++j)
      r.h[hess_index(i, j)] = fpp * u.g[i] * u.g[j] + fp * u.hess(i, j);
  return r;
}

inline Jet2 recip(const Jet2& u) {
  double iv = 1.0 / u.v;
  return compose1(u, iv, -iv * iv, 2.0 * iv * iv * iv);
}
inline Jet2 operator/(const Jet2& a, const Jet2& b) { return a * recip(b); }
inline Jet2 operator/(const Jet2& a, double c) { return (1.0 / c) * a; }
inline Jet2 operator/(double c, const Jet2& b) { return c * recip(b); }

inline Jet2 pow(const Jet2& u, double p) {
  double f = std::pow(u.v, p);
  return compose1(u, f, p * f / u.v, p * (p - 1.0) * f / (u.v * u.v));
}
inline Jet2 exp(const Jet2& u) {
  double f = std::exp(u.v);
  return compose1(u, f, f, f);
}
inline Jet2 sqrt(const Jet2& u) {
  double f = std::sqrt(u.v);
  return compose1(u, f, 0.5 / f, -0.25 / (f * u.v));
}

using JetCoords = std::array<Jet2, 4>;
using JetFn = std::function<Jet2(const JetCoords&)>;

inline JetCoords seed_point(const Vec4& y) {
  return {Jet2::variable(y[0], 0), Jet2::variable(y[1], 1), Jet2::variable(y[2], 2),
          Jet2::variable(y[3], 3)};
}

// |y| as a jet; valid away from the origin.
inline Jet2 jet_norm(const JetCoords& y) {
  return sqrt(y[0] * y[0] + y[1] * y[1] + y[2] * y[2] + y[3] * y[3]);
}

// A scalar field evaluated through jets. Fields that enter integrals declare
// a compact support ball; support_radius == 0 means "no declared support".
struct ScalarField {
  JetFn fn;
  Vec4 support_center{0, 0, 0, 0};
  double support_radius = 0.0;

  Jet2 jet(const Vec4& y) const { return fn(seed_point(y)); }
  double value(const Vec4& y) const { return jet(y).v; }
  Vec4 gradient(const Vec4& y) const { return jet(y).g; }
};

inline ScalarField make_field(JetFn fn) { return ScalarField{std::move(fn), {0, 0, 0, 0}, 0.0}; }

// --- frame operators ---

// Column i of the frame matrix at x (coefficients of the i-th frame field).
inline Vec4 frame_coeffs(int i, const PlanePoint& x) { return frame_column(i, x); }

double apply_T(int i, const ScalarField& u, const PlanePoint& y);
// Normalized frame: T_i/|y| for i = 1..3, T_4/|y|^2 for i = 4.
double apply_Z(int i, const ScalarField& u, const PlanePoint& y);
// Shifted commutator field: coefficients taken at y - z.
double apply_T4_shifted(const ScalarField& u, const PlanePoint& y, const PlanePoint& z);
double apply_Z4_shifted(const ScalarField& u, const PlanePoint& y, const PlanePoint& z);
// T_i(T_j u)(y); index 4 means the (y-z)-shifted field on both slots.
double apply_TT(int i, int j, const ScalarField& u, const PlanePoint& y, const PlanePoint& z);

// The two-point Laplacian applied to u at y, with pole parameter z on the
// first axis:
//   -(1/|y|^2) [sum_i T_i^2 u + 3 T_1 u + T_{4,y-z}^2 u] + (z1 y3/|y|^4) T_{4,y-z} u
double laplacian_z(const ScalarField& u, const PlanePoint& y, const PlanePoint& z);

// Formal adjoints with respect to plain Lebesgue measure:
//   Z_1^* u = -Z_1 u - 3u/|y|,  Z_i^* u = -Z_i u (i = 2,3),
//   Z_{4,y-z}^* u = -Z_{4,y-z} u - (z1 y3/|y|^3) u.
double adjoint_apply(int i, const ScalarField& u, const PlanePoint& y, const PlanePoint& z);

}  // namespace heis

#endif
