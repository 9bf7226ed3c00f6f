#ifndef HEIS_HEIS_CORE_HPP
#define HEIS_HEIS_CORE_HPP

#include <cmath>

#include "heis/vec.hpp"

// The ambient step-2 group on R^4 x R: points, group law, gauge norm and
// distance, anisotropic dilations. The identity is 0 and inverses are
// componentwise negation.

namespace heis {

struct HPoint {
  Vec4 x{};     // horizontal part
  double x5 = 0.0;  // vertical coordinate

  static HPoint zero() { return {}; }
};

inline bool operator==(const HPoint& a, const HPoint& b) {
  return a.x == b.x && a.x5 == b.x5;
}

inline HPoint group_mul(const HPoint& a, const HPoint& b) {
  double twist = 0.0;
  for (int j = 0; j < 2; ++j) twist += a.x[j] * b.x[j + 2] - a.x[j + 2] * b.x[j];
  return {a.x + b.x, a.x5 + b.x5 - 0.5 * twist};
}

inline HPoint group_inv(const HPoint& a) { return {-a.x, -a.x5}; }

// (|x|^4 + 16 x5^2)^(1/4)
inline double gauge_norm(const HPoint& a) {
  double h2 = norm2(a.x);
  return std::pow(h2 * h2 + 16.0 * a.x5 * a.x5, 0.25);
}

inline double gauge_dist(const HPoint& a, const HPoint& b) {
  return gauge_norm(group_mul(group_inv(a), b));
}

// delta_lambda(x, x5) = (lambda x, lambda^2 x5)
inline HPoint dilate(double lambda, const HPoint& a) {
  return {lambda * a.x, lambda * lambda * a.x5};
}

}  // namespace heis

#endif
