#pragma once

#include <cmath>

namespace ipt {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  Vec2& operator+=(const Vec2& o) {
    x += o.x;
    y += o.y;
    return *this;
  }
  Vec2& operator-=(const Vec2& o) {
    x -= o.x;
    y -= o.y;
    return *this;
  }
  friend Vec2 operator+(Vec2 a, const Vec2& b) { return a += b; }
  friend Vec2 operator-(Vec2 a, const Vec2& b) { return a -= b; }
  friend Vec2 operator*(Vec2 a, double s) { return {a.x * s, a.y * s}; }
  friend Vec2 operator*(double s, Vec2 a) { return {a.x * s, a.y * s}; }
  friend bool operator==(const Vec2&, const Vec2&) = default;

  double norm() const { return std::hypot(x, y); }
  double squared_norm() const { return x * x + y * y; }
};

inline double distance(const Vec2& a, const Vec2& b) { return (a - b).norm(); }

/// Counter-clockwise rotation by `angle` radians.
inline Vec2 rotate(const Vec2& v, double angle) {
  const double c = std::cos(angle);
  const double s = std::sin(angle);
  return {c * v.x - s * v.y, s * v.x + c * v.y};
}

/// A position with a discrete floor index.
struct FloorPoint {
  Vec2 xy;
  int floor = 0;
};

/// Dense 2x2 matrix, row-major.
struct Mat2 {
  double a = 0.0, b = 0.0;
  double c = 0.0, d = 0.0;

  static Mat2 identity(double s = 1.0) { return {s, 0.0, 0.0, s}; }

  friend Mat2 operator+(const Mat2& m, const Mat2& n) { return {m.a + n.a, m.b + n.b, m.c + n.c, m.d + n.d}; }
  friend Mat2 operator-(const Mat2& m, const Mat2& n) { return {m.a - n.a, m.b - n.b, m.c - n.c, m.d - n.d}; }
  friend Mat2 operator*(const Mat2& m, double s) { return {m.a * s, m.b * s, m.c * s, m.d * s}; }
  friend Mat2 operator*(const Mat2& m, const Mat2& n) {
    return {m.a * n.a + m.b * n.c, m.a * n.b + m.b * n.d, m.c * n.a + m.d * n.c, m.c * n.b + m.d * n.d};
  }
  friend Vec2 operator*(const Mat2& m, const Vec2& v) { return {m.a * v.x + m.b * v.y, m.c * v.x + m.d * v.y}; }

  Mat2 transposed() const { return {a, c, b, d}; }
  double trace() const { return a + d; }
  double determinant() const { return a * d - b * c; }
  bool is_finite() const { return std::isfinite(a) && std::isfinite(b) && std::isfinite(c) && std::isfinite(d); }

  /// Eigenvalues of the symmetric part, ascending.
  void symmetric_eigenvalues(double& lo, double& hi) const {
    const double off = 0.5 * (b + c);
    const double mean = 0.5 * (a + d);
    const double rad = std::hypot(0.5 * (a - d), off);
    lo = mean - rad;
    hi = mean + rad;
  }
};

}  // namespace ipt
