#pragma once

// Tensor-product Lagrange shape functions of degree 1 and 2 on the reference
// square [0,1]^2, and the 3x3 Gauss rule used for every cell integral.
//
// Local node (a, b) sits at reference coordinates (a/p, b/p) and has local
// index a + (p+1) b.

#include <array>
#include <cmath>

#include "dwr/errors.hpp"
#include "dwr/geometry.hpp"

namespace dwr {

struct QuadraturePoint {
  Point ref;
  double weight;  // reference-square weight, sums to 1
};

inline const std::array<QuadraturePoint, 9>& gauss3x3() {
  static const std::array<QuadraturePoint, 9> rule = [] {
    const double d = 0.5 * std::sqrt(0.6);
    const std::array<double, 3> t = {0.5 - d, 0.5, 0.5 + d};
    const std::array<double, 3> w = {5.0 / 18.0, 8.0 / 18.0, 5.0 / 18.0};
    std::array<QuadraturePoint, 9> r{};
    for (int j = 0; j < 3; ++j)
      for (int i = 0; i < 3; ++i) r[i + 3 * j] = {{t[i], t[j]}, w[i] * w[j]};
    return r;
  }();
  return rule;
}

/// 1D Lagrange basis of degree p on nodes k/p, value and derivative.
inline double lagrange1d(int p, int a, double t) {
  if (p == 1) return a == 0 ? 1.0 - t : t;
  switch (a) {
    case 0: return 2.0 * (t - 0.5) * (t - 1.0);
    case 1: return 4.0 * t * (1.0 - t);
    default: return 2.0 * t * (t - 0.5);
  }
}

inline double lagrange1d_deriv(int p, int a, double t) {
  if (p == 1) return a == 0 ? -1.0 : 1.0;
  switch (a) {
    case 0: return 4.0 * t - 3.0;
    case 1: return 4.0 - 8.0 * t;
    default: return 4.0 * t - 1.0;
  }
}

inline constexpr int nodes_per_cell(int degree) { return (degree + 1) * (degree + 1); }

/// Shape values and reference gradients of all local basis functions at one point.
struct ShapeTable {
  int degree = 1;
  std::array<double, 9> value{};
  std::array<Point, 9> ref_grad{};

  static ShapeTable at(int degree, Point ref) {
    detail::require(degree == 1 || degree == 2, "ShapeTable: degree must be 1 or 2");
    ShapeTable s;
    s.degree = degree;
    const int n1 = degree + 1;
    std::array<double, 3> lx{}, ly{}, dx{}, dy{};
    for (int a = 0; a < n1; ++a) {
      lx[a] = lagrange1d(degree, a, ref.x);
      ly[a] = lagrange1d(degree, a, ref.y);
      dx[a] = lagrange1d_deriv(degree, a, ref.x);
      dy[a] = lagrange1d_deriv(degree, a, ref.y);
    }
    for (int b = 0; b < n1; ++b)
      for (int a = 0; a < n1; ++a) {
        s.value[a + n1 * b] = lx[a] * ly[b];
        s.ref_grad[a + n1 * b] = {dx[a] * ly[b], lx[a] * dy[b]};
      }
    return s;
  }

  int size() const { return nodes_per_cell(degree); }
};

/// Shape tables at the 9 Gauss points, cached per degree.
inline const std::array<ShapeTable, 9>& shapes_at_gauss(int degree) {
  static const auto make = [](int p) {
    std::array<ShapeTable, 9> t{};
    for (int q = 0; q < 9; ++q) t[q] = ShapeTable::at(p, gauss3x3()[q].ref);
    return t;
  };
  static const std::array<ShapeTable, 9> q1 = make(1);
  static const std::array<ShapeTable, 9> q2 = make(2);
  return degree == 1 ? q1 : q2;
}

}  // namespace dwr
