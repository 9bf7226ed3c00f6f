#ifndef HEIS_PLANE_GEOM_HPP
#define HEIS_PLANE_GEOM_HPP

#include <cmath>

#include "heis/errors.hpp"
#include "heis/heis_core.hpp"
#include "heis/vec.hpp"

// Geometry of the plane x5 = 0. The plane inherits its distance and frame
// from the ambient group; the origin is the one point where the frame
// degenerates.

namespace heis {

using PlanePoint = Vec4;

inline constexpr PlanePoint kNeutral{1.0, 0.0, 0.0, 0.0};

inline HPoint embed(const PlanePoint& p) { return {p, 0.0}; }

// Coefficient columns of the frame matrix A_x. Column i holds the
// coefficients of the i-th frame field at x; column 4 is the commutator
// direction (-x3, -x4, x1, x2).
inline Vec4 frame_column(int i, const Vec4& x) {
  switch (i) {
    case 1: return {x[0], x[1], x[2], x[3]};
    case 2: return {-x[3], x[2], -x[1], x[0]};
    case 3: return {-x[1], x[0], x[3], -x[2]};
    case 4: return {-x[2], -x[3], x[0], x[1]};
    default: throw std::out_of_range("frame_column: index must be 1..4");
  }
}

// The rotation attached to x: columns are the frame fields in the quaternion
// order (T1, T3, T4, T2), which is the left-multiplication representation.
// In that order the matrix is the identity at the neutral element, satisfies
// A^T A = |x|^2 I, maps (1,0,0,0) to x, is a product homomorphism, preserves
// the plane distance (up to the factor |x|), and commutes with the frame
// fields. The frame-ordered columns (T1..T4, frame_column above) do not form
// a rotation with these properties; the two orderings serve different roles.
struct RotationFrame {
  Mat4 a;
  PlanePoint base;

  Vec4 apply(const Vec4& v) const { return a.apply(v); }
  Vec4 apply_transpose(const Vec4& v) const { return a.apply_transpose(v); }
  // A^-1 = A^T / |base|^2; requires base != 0.
  Vec4 apply_inverse(const Vec4& v) const {
    double n2 = norm2(base);
    if (n2 == 0.0) throw DegeneratePoint("rotation frame is singular at the origin");
    return (1.0 / n2) * a.apply_transpose(v);
  }
};

inline RotationFrame rotation_matrix(const PlanePoint& x) {
  static constexpr int kQuaternionOrder[4] = {1, 3, 4, 2};
  RotationFrame f;
  f.base = x;
  for (int j = 0; j < 4; ++j) f.a.cols[j] = frame_column(kQuaternionOrder[j], x);
  return f;
}

// Quaternion product carried by the rotation matrices: y o x = A_y x.
inline PlanePoint quat_mul(const PlanePoint& y, const PlanePoint& x) {
  return rotation_matrix(y).apply(x);
}

// Inverse element for quat_mul: A_x^T n / |x|^2 = (x1, -x2, -x3, -x4)/|x|^2.
inline PlanePoint quat_inv(const PlanePoint& x) {
  double n2 = norm2(x);
  if (n2 == 0.0) throw DegeneratePoint("quat_inv at the origin");
  return (1.0 / n2) * Vec4{x[0], -x[1], -x[2], -x[3]};
}

// Signed area-type cross term entering the plane distance. Antisymmetric,
// and equal to (A_x^T y)_4.
inline double plane_cross(const Vec4& x, const Vec4& y) {
  return x[0] * y[2] - x[2] * y[0] + x[1] * y[3] - y[1] * x[3];
}

inline double plane_dist4(const PlanePoint& x, const PlanePoint& y) {
  double w2 = norm2(x - y);
  double c = plane_cross(x, y);
  return w2 * w2 + 4.0 * c * c;
}

// d(x,y) = (|x-y|^4 + 4 (x1 y3 - x3 y1 + x2 y4 - y2 x4)^2)^(1/4)
inline double plane_dist(const PlanePoint& x, const PlanePoint& y) {
  return std::pow(plane_dist4(x, y), 0.25);
}

// Commutator-direction coordinate of y in the frame at x.
inline double commutator_coordinate(const PlanePoint& x, const PlanePoint& y) {
  return dot(frame_column(4, x), y);
}

// Same distance written through the frame at x (or at y); used as a
// consistency route in tests.
inline double plane_dist_via_frame(const PlanePoint& x, const PlanePoint& y) {
  double c4 = commutator_coordinate(x, y);
  double w2 = norm2(x - y);
  return std::pow(w2 * w2 + 4.0 * c4 * c4, 0.25);
}

enum class Regime { Euclidean, SubRiemannian };

// Near x, the distance looks Euclidean when the commutator coordinate of x
// seen from y dominates |x|^2, and sub-Riemannian otherwise. Ties go to
// Euclidean.
inline Regime regime_classify(const PlanePoint& x, const PlanePoint& y) {
  double n2 = norm2(x);
  if (n2 == 0.0) throw DegeneratePoint("regime_classify at the origin");
  double c4 = commutator_coordinate(y, x);
  return n2 * n2 <= c4 * c4 ? Regime::Euclidean : Regime::SubRiemannian;
}

// Closed metric ball.
inline bool ball_contains(const PlanePoint& c, double r, const PlanePoint& y) {
  return plane_dist(c, y) <= r;
}

}  // namespace heis

#endif
