#ifndef HEIS_VEC_HPP
#define HEIS_VEC_HPP

#include <array>
#include <cmath>

namespace heis {

using Vec4 = std::array<double, 4>;

inline Vec4 operator+(const Vec4& a, const Vec4& b) {
  return {a[0] + b[0], a[1] + b[1], a[2] + b[2], a[3] + b[3]};
}
inline Vec4 operator-(const Vec4& a, const Vec4& b) {
  return {a[0] - b[0], a[1] - b[1], a[2] - b[2], a[3] - b[3]};
}
inline Vec4 operator-(const Vec4& a) { return {-a[0], -a[1], -a[2], -a[3]}; }
inline Vec4 operator*(double s, const Vec4& a) {
  return {s * a[0], s * a[1], s * a[2], s * a[3]};
}

inline double dot(const Vec4& a, const Vec4& b) {
  return a[0] * b[0] + a[1] * b[1] + a[2] * b[2] + a[3] * b[3];
}
inline double norm2(const Vec4& a) { return dot(a, a); }
inline double norm(const Vec4& a) { return std::sqrt(norm2(a)); }

// Column-major 4x4 matrix; col(j) is cheap, which is what the frame code wants.
struct Mat4 {
  std::array<Vec4, 4> cols{};

  const Vec4& col(int j) const { return cols[j]; }
  double operator()(int i, int j) const { return cols[j][i]; }

  Vec4 apply(const Vec4& v) const {
    Vec4 r{0, 0, 0, 0};
    for (int j = 0; j < 4; ++j)
      for (int i = 0; i < 4; ++i) r[i] += cols[j][i] * v[j];
    return r;
  }
  Vec4 apply_transpose(const Vec4& v) const {
    return {dot(cols[0], v), dot(cols[1], v), dot(cols[2], v), dot(cols[3], v)};
  }
  Mat4 mul(const Mat4& o) const {
    Mat4 r;
    for (int j = 0; j < 4; ++j) r.cols[j] = apply(o.cols[j]);
    return r;
  }

  static Mat4 identity() {
    Mat4 m;
    for (int j = 0; j < 4; ++j) m.cols[j][j] = 1.0;
    return m;
  }
};

}  // namespace heis

#endif
