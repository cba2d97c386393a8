#pragma once

#include <cmath>
#include <utility>

namespace lrbms {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;
};

inline Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
inline Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
inline Vec2 operator*(double s, Vec2 a) { return {s * a.x, s * a.y}; }

inline double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
inline double cross(Vec2 a, Vec2 b) { return a.x * b.y - a.y * b.x; }
inline double norm(Vec2 a) { return std::sqrt(dot(a, a)); }

/// Rotation by +90 degrees; maps a tangent onto a normal.
inline Vec2 perp(Vec2 a) { return {-a.y, a.x}; }

/// Symmetric 2x2 tensor, stored as (a11, a12, a22).
struct SymMat2 {
  double a11 = 1.0;
  double a12 = 0.0;
  double a22 = 1.0;

  Vec2 apply(Vec2 v) const { return {a11 * v.x + a12 * v.y, a12 * v.x + a22 * v.y}; }

  double det() const { return a11 * a22 - a12 * a12; }

  /// Inverse applied to a vector (the tensor must be non-singular).
  Vec2 solve(Vec2 v) const {
    const double d = det();
    return {(a22 * v.x - a12 * v.y) / d, (a11 * v.y - a12 * v.x) / d};
  }

  /// (smallest, largest) eigenvalue.
  std::pair<double, double> eigenvalues() const {
    const double mid = 0.5 * (a11 + a22);
    const double rad = std::sqrt(0.25 * (a11 - a22) * (a11 - a22) + a12 * a12);
    return {mid - rad, mid + rad};
  }

  static SymMat2 identity() { return {1.0, 0.0, 1.0}; }
  static SymMat2 diagonal(double d1, double d2) { return {d1, 0.0, d2}; }
  SymMat2 scaled(double s) const { return {s * a11, s * a12, s * a22}; }
};

}  // namespace lrbms
