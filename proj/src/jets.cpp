#include "heis/jets.hpp"

#include <cmath>

namespace heis {

namespace {

// d(column j of A at e_k)[l] -- the constant coefficient derivatives.
double coeff_deriv(int j, int l, int k) {
  Vec4 ek{0, 0, 0, 0};
  ek[k] = 1.0;
  return frame_column(j, ek)[l];
}

void check_axis(const PlanePoint& z) {
  double off = std::fabs(z[1]) + std::fabs(z[2]) + std::fabs(z[3]);
  if (off > 1e-12 * (1.0 + std::fabs(z[0])))
    throw DegeneratePoint("operator expects the pole on the first axis");
}

}  // namespace

double apply_T(int i, const ScalarField& u, const PlanePoint& y) {
  return dot(frame_column(i, y), u.gradient(y));
}

double apply_Z(int i, const ScalarField& u, const PlanePoint& y) {
  double n = norm(y);
  if (n == 0.0) throw DegeneratePoint("apply_Z at the origin");
  double t = apply_T(i, u, y);
  return i == 4 ? t / (n * n) : t / n;
}

double apply_T4_shifted(const ScalarField& u, const PlanePoint& y, const PlanePoint& z) {
  return dot(frame_column(4, y - z), u.gradient(y));
}

double apply_Z4_shifted(const ScalarField& u, const PlanePoint& y, const PlanePoint& z) {
  double n = norm(y);
  if (n == 0.0) throw DegeneratePoint("apply_Z4_shifted at the origin");
  return apply_T4_shifted(u, y, z) / n;
}

double apply_TT(int i, int j, const ScalarField& u, const PlanePoint& y, const PlanePoint& z) {
  Jet2 uj = u.jet(y);
  Vec4 ai = (i == 4) ? frame_column(4, y - z) : frame_column(i, y);
  Vec4 aj = (j == 4) ? frame_column(4, y - z) : frame_column(j, y);
  // T_i(T_j u) = sum_k a^i_k [ sum_l (d_k a^j_l) d_l u + sum_l a^j_l d^2_{kl} u ]
  double s = 0.0;
  for (int k = 0; k < 4; ++k) {
    double inner = 0.0;
    for (int l = 0; l < 4; ++l) inner += coeff_deriv(j, l, k) * uj.g[l] + aj[l] * uj.hess(k, l);
    s += ai[k] * inner;
  }
  return s;
}

double laplacian_z(const ScalarField& u, const PlanePoint& y, const PlanePoint& z) {
  check_axis(z);
  double n2 = norm2(y);
  if (n2 == 0.0) throw DegeneratePoint("laplacian_z at the origin");
  Jet2 uj = u.jet(y);

  auto tt = [&](int i) {
    Vec4 a = (i == 4) ? frame_column(4, y - z) : frame_column(i, y);
    double s = 0.0;
    for (int k = 0; k < 4; ++k) {
      double inner = 0.0;
      for (int l = 0; l < 4; ++l) inner += coeff_deriv(i, l, k) * uj.g[l] + a[l] * uj.hess(k, l);
      s += a[k] * inner;
    }
    return s;
  };

  double sum_tt = tt(1) + tt(2) + tt(3) + tt(4);
  double t1 = dot(frame_column(1, y), uj.g);
  double t4 = dot(frame_column(4, y - z), uj.g);
  double r = -(sum_tt + 3.0 * t1) / n2 + z[0] * y[2] / (n2 * n2) * t4;
  if (!std::isfinite(r)) throw PoleHit("laplacian_z: field singular at evaluation point");
  return r;
}

double adjoint_apply(int i, const ScalarField& u, const PlanePoint& y, const PlanePoint& z) {
  double n = norm(y);
  if (n == 0.0) throw DegeneratePoint("adjoint_apply at the origin");
  switch (i) {
    case 1: return -apply_Z(1, u, y) - 3.0 * u.value(y) / n;
    case 2: return -apply_Z(2, u, y);
    case 3: return -apply_Z(3, u, y);
    case 4: {
      check_axis(z);
      return -apply_Z4_shifted(u, y, z) - z[0] * y[2] / (n * n * n) * u.value(y);
    }
    default: throw std::out_of_range("adjoint_apply: index must be 1..4");
  }
}

}  // namespace heis
