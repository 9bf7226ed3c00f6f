#include "heis/reconstruct.hpp"

#include <cmath>

#include "heis/errors.hpp"
#include "heis/kernels.hpp"

namespace heis {

double BumpFunction::value(const Vec4& y) const {
  double s = norm2(y - center) / (radius * radius);
  if (s >= 1.0) return 0.0;
  return amplitude * std::exp(1.0 - 1.0 / (1.0 - s));
}

Vec4 BumpFunction::gradient(const Vec4& y) const {
  double s = norm2(y - center) / (radius * radius);
  if (s >= 1.0) return {0, 0, 0, 0};
  double v = amplitude * std::exp(1.0 - 1.0 / (1.0 - s));
  double dv_ds = -v / ((1.0 - s) * (1.0 - s));
  return (2.0 * dv_ds / (radius * radius)) * (y - center);
}

Jet2 BumpFunction::jet(const Vec4& y) const {
  double s0 = norm2(y - center) / (radius * radius);
  if (s0 >= 1.0) return Jet2::constant(0.0);
  JetCoords q = seed_point(y);
  Jet2 w0 = q[0] - center[0], w1 = q[1] - center[1], w2 = q[2] - center[2], w3 = q[3] - center[3];
  Jet2 s = (w0 * w0 + w1 * w1 + w2 * w2 + w3 * w3) / (radius * radius);
  return amplitude * exp(1.0 - recip(1.0 - s));
}

ScalarField BumpFunction::field() const {
  BumpFunction copy = *this;
  ScalarField f;
  f.fn = [copy](const JetCoords& q) {
    Vec4 y{q[0].v, q[1].v, q[2].v, q[3].v};
    return copy.jet(y);
  };
  f.support_center = center;
  f.support_radius = radius;
  return f;
}

namespace {

// Z_i u from the closed-form bump gradient; returns 0 at the origin (the
// integrand there is excised or measure-zero).
double z_of_bump(int i, const BumpFunction& u, const Vec4& y) {
  double n = norm(y);
  if (n < 1e-14) return 0.0;
  return dot(frame_column(i, y), u.gradient(y)) / n;
}

double z4_of_bump(const BumpFunction& u, const Vec4& y, const Vec4& z) {
  double n = norm(y);
  if (n < 1e-14) return 0.0;
  return dot(frame_column(4, y - z), u.gradient(y)) / n;
}

// Rotate the pole onto the axis and the bump along with it.
struct AxisProblem {
  BumpFunction u;
  double z1 = 0.0;
};

AxisProblem to_axis(const BumpFunction& u, const PlanePoint& z) {
  AxisProblem ap;
  if (norm2(z) == 0.0) {
    ap.u = u;
    return ap;
  }
  CanonicalPair cp = canonicalize(z);
  ap.u = BumpFunction{cp.pull_back(u.center), u.radius, u.amplitude};
  ap.z1 = cp.z1;
  return ap;
}

std::vector<Singularity> reconstruction_singularities(const BumpFunction& u, double z1) {
  std::vector<Singularity> s;
  double r = u.radius;
  // pole first: it carries the strong kernel singularity
  if (z1 > 0.0) {
    Vec4 zp{z1, 0, 0, 0};
    double inside = r - norm(zp - u.center);
    double excl = inside > 0 ? std::min(0.05 * r, 0.1 * inside) : 0.0;
    s.push_back({zp, excl});
  }
  s.push_back({{0, 0, 0, 0}, 0.0});
  return s;
}

}  // namespace

ReconstructionReport reconstruct(const BumpFunction& u, const PlanePoint& z,
                                 const QuadratureSpec& spec) {
  ReconstructionReport rep;
  rep.spec_used = spec;
  rep.target = u.value(z);
  AxisProblem ap = to_axis(u, z);

  MultiIntegrand m;
  m.support_center = ap.u.center;
  m.support_radius = ap.u.radius;

  if (ap.z1 == 0.0) {
    // Characteristic pole: kernels and remainder vanish; gradient term only.
    m.components = 1;
    m.eval = [&ap](const Vec4& y, double* out) {
      out[0] = 0.0;
      if (norm2(y) == 0.0) return;
      Vec4 zg = grad_gamma_axis(y, 0.0);
      for (int i = 1; i <= 3; ++i) out[0] += zg[i - 1] * z_of_bump(i, ap.u, y);
    };
    auto est = integrate_multi(m, Weight::PlaneMeasure, reconstruction_singularities(ap.u, 0.0), spec);
    rep.term_gradient = est[0].value;
    rep.term_zero_order = 0.0;
    rep.reconstructed = rep.term_gradient;
    rep.error_indicator = est[0].error_indicator;
    return rep;
  }

  double z1 = ap.z1;
  m.components = 2;
  m.eval = [&ap, z1](const Vec4& y, double* out) {
    out[0] = out[1] = 0.0;
    if (norm2(y) == 0.0) return;
    Vec4 zg = grad_gamma_axis(y, z1);
    Vec4 k = kernels_K_axis(y, z1);
    for (int i = 1; i <= 3; ++i) out[0] += (zg[i - 1] - k[i]) * z_of_bump(i, ap.u, y);
    out[1] = -(k[0] + f_z_axis(y, z1)) * ap.u.value(y);
  };
  auto est = integrate_multi(m, Weight::PlaneMeasure, reconstruction_singularities(ap.u, z1), spec);
  rep.term_gradient = est[0].value;
  rep.term_zero_order = est[1].value;
  rep.reconstructed = rep.term_gradient + rep.term_zero_order;
  rep.error_indicator = est[0].error_indicator + est[1].error_indicator;
  return rep;
}

double solfond_check(const BumpFunction& u, const PlanePoint& z, const QuadratureSpec& spec) {
  if (norm2(z) == 0.0) throw DegeneratePoint("solfond_check requires a non-characteristic pole");
  AxisProblem ap = to_axis(u, z);
  double z1 = ap.z1;
  Vec4 zp{z1, 0, 0, 0};

  MultiIntegrand m;
  m.support_center = ap.u.center;
  m.support_radius = ap.u.radius;
  m.components = 3;
  m.eval = [&ap, z1, zp](const Vec4& y, double* out) {
    out[0] = out[1] = out[2] = 0.0;
    if (norm2(y) == 0.0) return;
    Vec4 zg = grad_gamma_axis(y, z1);
    for (int i = 1; i <= 3; ++i) out[0] += zg[i - 1] * z_of_bump(i, ap.u, y);
    out[1] = zg[3] * z4_of_bump(ap.u, y, zp);
    out[2] = (f_z_axis(y, z1) + kernels_K_axis(y, z1)[0]) * ap.u.value(y);
  };
  auto est = integrate_multi(m, Weight::PlaneMeasure, reconstruction_singularities(ap.u, z1), spec);
  double recovered = est[0].value + est[1].value - est[2].value;
  return std::fabs(u.value(z) - recovered);
}

LimitStudy limit_study(const BumpFunction& u, const std::vector<PlanePoint>& z_seq,
                       const QuadratureSpec& spec) {
  LimitStudy study;

  for (const PlanePoint& z : z_seq) {
    if (norm2(z) == 0.0) throw DegeneratePoint("limit_study: pole sequence must avoid 0");
    AxisProblem ap = to_axis(u, z);
    double z1 = ap.z1;

    MultiIntegrand m;
    m.support_center = ap.u.center;
    m.support_radius = ap.u.radius;
    m.components = 3;
    m.eval = [&ap, z1](const Vec4& y, double* out) {
      out[0] = out[1] = out[2] = 0.0;
      if (norm2(y) == 0.0) return;
      Vec4 k = kernels_K_axis(y, z1);
      double uy = ap.u.value(y);
      out[0] = k[0] * uy;
      out[1] = f_z_axis(y, z1) * uy;
      for (int i = 1; i <= 3; ++i) out[2] += k[i] * z_of_bump(i, ap.u, y);
    };
    auto est = integrate_multi(m, Weight::PlaneMeasure, reconstruction_singularities(ap.u, z1), spec);
    study.entries.push_back({z, est[0], est[1], est[2]});
  }

  // Limit target at z = 0, in both weight variants.
  MultiIntegrand t;
  t.support_center = u.center;
  t.support_radius = u.radius;
  t.components = 2;
  t.eval = [&u](const Vec4& y, double* out) {
    out[0] = out[1] = 0.0;
    double n = norm(y);
    if (n < 1e-14) return;
    double a = -z3z4_gamma_axis(y, 0.0) * z_of_bump(2, u, y) +
               z2z4_gamma_axis(y, 0.0) * z_of_bump(3, u, y);
    out[0] = 0.5 * n * a;
    out[1] = 0.5 * n * n * a;
  };
  auto test = integrate_multi(t, Weight::PlaneMeasure, {{{0, 0, 0, 0}, 0.0}}, spec);
  study.target_weight_y = test[0].value;
  study.target_weight_y_sq = test[1].value;
  return study;
}

}  // namespace heis
