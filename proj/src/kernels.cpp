#include "heis/kernels.hpp"

#include <atomic>
#include <cmath>

#include "heis/errors.hpp"

namespace heis {

namespace {

double closed_form_integral() {
  // 42*pi*B(5/4, 3/2)
  double beta = std::tgamma(1.25) * std::tgamma(1.5) / std::tgamma(2.75);
  return 42.0 * M_PI * beta;
}

std::atomic<double> g_normalizer{0.0};  // 0: use closed form

void require_off_pole(const PlanePoint& y, const PlanePoint& z) {
  if (plane_dist4(y, z) == 0.0) throw PoleHit("kernel evaluated at its pole");
}
void require_off_origin(const PlanePoint& y) {
  if (norm2(y) == 0.0) throw DegeneratePoint("kernel evaluated at the characteristic point");
}

}  // namespace

double kernel_constant_integral() { return closed_form_integral(); }

double gamma_normalizer() {
  double v = g_normalizer.load();
  return v > 0.0 ? v : 0.5 * closed_form_integral();
}

void pin_gamma_normalizer(double moment_integral) { g_normalizer.store(0.5 * moment_integral); }

double gamma_kernel(const PlanePoint& y, const PlanePoint& z) {
  require_off_pole(y, z);
  return std::pow(plane_dist4(y, z), -0.75) / gamma_normalizer();
}

Vec4 grad_d4_axis(const PlanePoint& y, double z1) {
  Vec4 w = y - Vec4{z1, 0, 0, 0};
  double w2 = norm2(w);
  double y3sq = y[2] * y[2];
  return {4 * w2 * w2 + 4 * w2 * z1 * w[0] + 8 * y3sq * z1 * z1,
          4 * w2 * z1 * y[3] - 8 * y[1] * y[2] * z1 * z1,
          4 * w2 * z1 * y[1] + 8 * y[3] * y[2] * z1 * z1,
          8 * w[0] * y[2] * z1 * z1};
}

Vec4 grad_gamma_axis(const PlanePoint& y, double z1) {
  require_off_origin(y);
  PlanePoint z{z1, 0, 0, 0};
  require_off_pole(y, z);
  double d4 = plane_dist4(y, z);
  double d7 = std::pow(d4, 1.75);
  double c = -0.75 / (gamma_normalizer() * d7 * norm(y));
  Vec4 g = grad_d4_axis(y, z1);
  return {c * g[0], c * g[1], c * g[2], c * g[3]};
}

Vec4 grad_gamma(const PlanePoint& y, const PlanePoint& z) {
  if (norm2(z) == 0.0) return grad_gamma_axis(y, 0.0);
  CanonicalPair cp = canonicalize(z);
  return grad_gamma_axis(cp.pull_back(y), cp.z1);
}

RTerms r_terms(const PlanePoint& y, double z1) {
  PlanePoint z{z1, 0, 0, 0};
  Vec4 w = y - z;
  double w2 = norm2(w), w4 = w2 * w2;
  double d4 = plane_dist4(y, z);
  double z1sq = z1 * z1;
  double y3sq = y[2] * y[2];
  RTerms r;
  r.r11 = 16 * d4 * z1sq * (w[0] * w[0] + y[3] * y[3] + y[1] * y[1]);
  r.r12 = 4 * (w4 + d4) * (w4 + d4);
  r.r13 = 16 * (w4 + d4) * w2 * z1 * w[0];
  r.r21 = 28 * z1sq * (y[1] * y[1] + y[3] * y[3] + w[0] * w[0]);
  r.r22 = 16 * w4;
  r.r23 = 4 * y3sq * z1sq + 36 * w2 * z1 * w[0];
  r.r32 = 12 * w4;
  // 3 T1 d^4 contributes (12, 24); the last piece is the shifted-field term
  // -(z1 y3/|y|^2) T_{4,y-z} d^4.
  double n2 = norm2(y);
  if (n2 == 0.0) throw DegeneratePoint("r_terms at the characteristic point");
  r.r33 = 12 * w2 * z1 * w[0] + 24 * y3sq * z1sq - 8 * z1sq * z1 * y3sq * w[0] / n2;
  return r;
}

double f_z_axis(const PlanePoint& y, double z1) {
  require_off_origin(y);
  if (z1 == 0.0) return 0.0;
  PlanePoint z{z1, 0, 0, 0};
  require_off_pole(y, z);
  RTerms r = r_terms(y, z1);
  double d4 = plane_dist4(y, z);
  double d11 = std::pow(d4, 2.75);
  double y3 = y[2];
  double tail = 112.0 * y3 * y3 * y3 * y3 * z1 * z1 * z1 * z1;
  return 3.0 / (4.0 * gamma_normalizer() * norm2(y) * d11) *
         (-1.75 * r.r13 + d4 * r.r23 + d4 * r.r33 - tail);
}

double f_z(const PlanePoint& y, const PlanePoint& z) {
  if (norm2(z) == 0.0) return 0.0;
  CanonicalPair cp = canonicalize(z);
  return f_z_axis(cp.pull_back(y), cp.z1);
}

namespace {

// Z_{4,y-z} Gamma on the axis as a jet expression:
//   -6 d^-7 (y1 - z1) y3 z1^2 / (C |y|)
Jet2 z4_gamma_jet(const JetCoords& q, double z1, double normalizer) {
  Jet2 w1 = q[0] - z1;
  Jet2 w2 = w1 * w1 + q[1] * q[1] + q[2] * q[2] + q[3] * q[3];
  Jet2 d4 = w2 * w2 + (4.0 * z1 * z1) * (q[2] * q[2]);
  Jet2 d7 = pow(d4, -1.75);
  Jet2 ny = sqrt(q[0] * q[0] + q[1] * q[1] + q[2] * q[2] + q[3] * q[3]);
  return (-6.0 * z1 * z1 / normalizer) * d7 * w1 * q[2] * recip(ny);
}

Vec4 z4_gamma_gradient(const PlanePoint& y, double z1) {
  return z4_gamma_jet(seed_point(y), z1, gamma_normalizer()).g;
}

}  // namespace

double z2z4_gamma_axis(const PlanePoint& y, double z1) {
  return dot(frame_column(2, y), z4_gamma_gradient(y, z1)) / norm(y);
}

double z3z4_gamma_axis(const PlanePoint& y, double z1) {
  return dot(frame_column(3, y), z4_gamma_gradient(y, z1)) / norm(y);
}

Vec4 kernels_K_axis(const PlanePoint& y, double z1) {
  require_off_origin(y);
  if (z1 == 0.0) return {0, 0, 0, 0};
  PlanePoint z{z1, 0, 0, 0};
  require_off_pole(y, z);
  double ny = norm(y), n2 = ny * ny;
  double z4g = grad_gamma_axis(y, z1)[3];
  double yyz = dot(y, y - z);
  double k1 = y[2] * z1 / n2 * z4g;
  double k2 = -1.5 * y[1] * z1 / n2 * z4g - yyz / (2 * ny) * z3z4_gamma_axis(y, z1);
  double k3 = 1.5 * y[3] * z1 / n2 * z4g + yyz / (2 * ny) * z2z4_gamma_axis(y, z1);
  double k0 = -2.0 * y[2] * z1 / (n2 * ny) * z4g;
  return {k0, k1, k2, k3};
}

Vec4 kernels_K(const PlanePoint& y, const PlanePoint& z) {
  if (norm2(z) == 0.0) return {0, 0, 0, 0};
  CanonicalPair cp = canonicalize(z);
  return kernels_K_axis(cp.pull_back(y), cp.z1);
}

double defect(const PlanePoint& y, const PlanePoint& z) {
  if (norm2(z) == 0.0) return 0.0;
  CanonicalPair cp = canonicalize(z);
  PlanePoint yr = cp.pull_back(y);
  return f_z_axis(yr, cp.z1) + kernels_K_axis(yr, cp.z1)[0];
}

BoundValues bound_values(const PlanePoint& y, const PlanePoint& z) {
  require_off_origin(y);
  require_off_pole(y, z);
  double d = plane_dist(y, z);
  double d4 = std::pow(d, -4.0);
  double ny = norm(y), nz = norm(z);
  double c = gamma_normalizer();
  BoundValues b;
  b.zi_gamma = 8.0 * (d + nz) * d4 / (c * ny);
  b.z4_gamma = 3.0 * nz * d4 / (c * ny);
  b.f_shape = (std::sqrt(nz * ny) + nz) * d4 / (c * ny * ny);
  b.k0_shape = d4 * nz * nz / (ny * ny * ny);
  b.k123_shape = d4 * nz * nz / (ny * ny);
  b.zi_gamma_corollary = 64.0 * d4;
  b.z4_gamma_corollary = 6.0 * d4;
  return b;
}

CanonicalPair canonicalize(const PlanePoint& z) {
  double nz = norm(z);
  if (nz == 0.0) throw DegeneratePoint("canonicalize at the origin");
  CanonicalPair cp{rotation_matrix((1.0 / nz) * z), nz};
  return cp;
}

KernelBundle kernel_bundle(const PlanePoint& y, const PlanePoint& z) {
  KernelBundle kb;
  kb.gamma = gamma_kernel(y, z);
  kb.grad_gamma = grad_gamma(y, z);
  kb.f_z = f_z(y, z);
  kb.k = kernels_K(y, z);
  kb.bounds = bound_values(y, z);
  return kb;
}

ScalarField gamma_field(const PlanePoint& z) {
  double c = gamma_normalizer();
  return make_field([z, c](const JetCoords& q) {
    Jet2 w0 = q[0] - z[0], w1 = q[1] - z[1], w2 = q[2] - z[2], w3 = q[3] - z[3];
    Jet2 wn = w0 * w0 + w1 * w1 + w2 * w2 + w3 * w3;
    Jet2 cross = q[0] * z[2] - q[2] * z[0] + q[1] * z[3] - z[1] * q[3];
    Jet2 d4 = wn * wn + 4.0 * cross * cross;
    return pow(d4, -0.75) / c;
  });
}

}  // namespace heis
