#pragma once

#include <array>
#include <cmath>

namespace dwr {

struct Point {
  double x = 0.0;
  double y = 0.0;

  friend Point operator+(Point a, Point b) { return {a.x + b.x, a.y + b.y}; }
  friend Point operator-(Point a, Point b) { return {a.x - b.x, a.y - b.y}; }
  friend Point operator*(double s, Point a) { return {s * a.x, s * a.y}; }
  friend bool operator==(Point a, Point b) = default;
};

inline double dot(Point a, Point b) { return a.x * b.x + a.y * b.y; }
inline double norm(Point a) { return std::sqrt(dot(a, a)); }

/// Value and gradient of a scalar function at a point.
struct ValueGrad {
  double value = 0.0;
  Point grad{};
};

/// Closed axis-aligned box [lo.x, hi.x] x [lo.y, hi.y].
struct Box {
  Point lo;
  Point hi;

  bool contains(Point p) const {
    return p.x >= lo.x && p.x <= hi.x && p.y >= lo.y && p.y <= hi.y;
  }
  double area() const { return (hi.x - lo.x) * (hi.y - lo.y); }
};

inline bool in_unit_square(Point p) {
  return p.x >= 0.0 && p.x <= 1.0 && p.y >= 0.0 && p.y <= 1.0;
}

inline bool on_unit_square_boundary(Point p) {
  return p.x == 0.0 || p.x == 1.0 || p.y == 0.0 || p.y == 1.0;
}

}  // namespace dwr
