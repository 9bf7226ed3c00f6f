#ifndef HEIS_KERNELS_HPP
#define HEIS_KERNELS_HPP

#include "heis/jets.hpp"
#include "heis/plane_geom.hpp"
#include "heis/vec.hpp"

// Closed-form evaluation of the approximate fundamental solution
// Gamma(y,z) = d(y,z)^-3 / C, its frame derivatives, the remainder kernel
// f_z, the representation kernels K0..K3, and the pointwise bounds the
// verification suite checks. Axis variants take the pole as (z1,0,0,0);
// general poles are handled by rotating z onto the first axis, under which
// every quantity here is invariant.

namespace heis {

// The moment integral 21 * int_{(x1^2+x2^2+x4^2)^2 + x3^2 <= 1} (x1^2+x2^2+x4^2) dx,
// in closed form 42*pi*B(5/4, 3/2). The quadrature module recomputes it
// numerically as a cross-check.
double kernel_constant_integral();

// Normalizer carried by Gamma. The small-sphere flux of Gamma's gradient
// field converges to minus half the moment integral, so Gamma divides by
// half of it; that makes the flux limit exactly -1 and the representation
// formula reproduce u(z) with unit constant.
double gamma_normalizer();

// Pin the normalizer from an independently computed moment integral
// (normalizer = integral/2). Call once, before parallel work.
void pin_gamma_normalizer(double moment_integral);

double gamma_kernel(const PlanePoint& y, const PlanePoint& z);

// T_i d^4 on the axis: (T1, T2, T3, T_{4,y-z}) d^4.
Vec4 grad_d4_axis(const PlanePoint& y, double z1);

// (Z1, Z2, Z3, Z_{4,y-z}) Gamma. Axis variant plus rotation-extended form.
Vec4 grad_gamma_axis(const PlanePoint& y, double z1);
Vec4 grad_gamma(const PlanePoint& y, const PlanePoint& z);

// The grouped remainders of the gradient-square and second-order identities
// for d^4, plus the first-order group entering f_z.
struct RTerms {
  double r11, r12, r13;  // sum (T_i d^4)^2 = r11 + r12 + r13
  double r21, r22, r23;  // sum T_i^2 d^4   = r21 + r22 + r23
  double r32, r33;       // 3 T1 d^4 - (z1 y3/|y|^2) T4 d^4 = r32 + r33
};
RTerms r_terms(const PlanePoint& y, double z1);

// f_z(y) = Delta_z Gamma(y,z) away from the pole (two-point Laplacian as in
// laplacian_z). Zero when z = 0.
double f_z_axis(const PlanePoint& y, double z1);
double f_z(const PlanePoint& y, const PlanePoint& z);

// Second frame derivatives of Gamma entering K2/K3, computed by jets over
// the closed form of Z_{4,y-z} Gamma.
double z2z4_gamma_axis(const PlanePoint& y, double z1);
double z3z4_gamma_axis(const PlanePoint& y, double z1);

// Representation kernels, returned as (K0, K1, K2, K3). Zero when z = 0.
Vec4 kernels_K_axis(const PlanePoint& y, double z1);
Vec4 kernels_K(const PlanePoint& y, const PlanePoint& z);

// Divergence-form defect: the weak-form Laplacian of Gamma equals
// f_z + K0 away from the pole. This is the zero-order kernel of the
// pre-rewriting representation identity.
double defect(const PlanePoint& y, const PlanePoint& z);

// Right-hand sides of the pointwise estimates at (y, z).
struct BoundValues {
  double zi_gamma;     // 8 (d + |z|) d^-4 / (C |y|)      for Z_1..Z_3 Gamma
  double z4_gamma;     // 3 |z| d^-4 / (C |y|)            for Z_{4,y-z} Gamma
  double f_shape;      // (sqrt(|z||y|) + |z|) d^-4 / (C |y|^2)  for f_z
  double k0_shape;     // d^-4 |z|^2 / |y|^3   (constant calibrated by the suite)
  double k123_shape;   // d^-4 |z|^2 / |y|^2   (constant calibrated by the suite)
  double zi_gamma_corollary;  // 64 d^-4, valid on |z| <= 2|y|
  double z4_gamma_corollary;  // 6 d^-4, same region
};
BoundValues bound_values(const PlanePoint& y, const PlanePoint& z);

// Rotation taking the first axis to z/|z|; pull_back maps y into the frame
// where the pole sits at (|z|, 0, 0, 0).
struct CanonicalPair {
  RotationFrame rotation;
  double z1;
  PlanePoint pull_back(const PlanePoint& y) const { return rotation.apply_inverse(y); }
};
CanonicalPair canonicalize(const PlanePoint& z);

// Everything at one pair, for reporting.
struct KernelBundle {
  double gamma;
  Vec4 grad_gamma;  // Z1..Z3, Z4-shifted
  double f_z;
  Vec4 k;           // K0..K3
  BoundValues bounds;
};
KernelBundle kernel_bundle(const PlanePoint& y, const PlanePoint& z);

// Gamma(., z) as a jet-evaluable field (for the differentiation oracles).
ScalarField gamma_field(const PlanePoint& z);

}  // namespace heis

#endif
