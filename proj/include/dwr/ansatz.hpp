#pragma once

// z(x) = d(x) * net(x) + g(x) with d(x, y) = x(1-x) y(1-y), which vanishes
// exactly on the boundary of the unit square.

#include <functional>

#include "dwr/mlp.hpp"

namespace dwr {

struct DistanceJet {
  double value;
  Point grad;
  double laplacian;
};

inline DistanceJet boundary_distance(Point p) {
  const double fx = p.x * (1.0 - p.x), fy = p.y * (1.0 - p.y);
  const double dfx = 1.0 - 2.0 * p.x, dfy = 1.0 - 2.0 * p.y;
  return {fx * fy, {dfx * fy, fx * dfy}, -2.0 * fy - 2.0 * fx};
}

/// Extension of the Dirichlet data into the domain, with its Laplacian.
struct BoundaryExtension {
  std::function<double(Point)> value;
  std::function<double(Point)> laplacian;

  static BoundaryExtension zero() {
    return {[](Point) { return 0.0; }, [](Point) { return 0.0; }};
  }
  bool is_zero() const { return !value; }
};

struct BoundaryAnsatz {
  Mlp net;
  BoundaryExtension g_tilde{};  // empty functions mean g = 0

  double g(Point x) const { return g_tilde.value ? g_tilde.value(x) : 0.0; }
  double g_laplacian(Point x) const { return g_tilde.laplacian ? g_tilde.laplacian(x) : 0.0; }
};

struct AnsatzValue {
  double value;
  double laplacian;
};

inline AnsatzValue ansatz_eval(const BoundaryAnsatz& a, Point x) {
  const DistanceJet d = boundary_distance(x);
  const NetJet n = a.net.forward_with_derivatives(x);
  return {d.value * n.value + a.g(x),
          d.laplacian * n.value + 2.0 * dot(d.grad, n.grad) + d.value * n.laplacian + a.g_laplacian(x)};
}

/// Ansatz values at many points in one batched pass.
inline Eigen::VectorXd ansatz_values(const BoundaryAnsatz& a, const std::vector<Point>& pts) {
  Eigen::Matrix2Xd m(2, static_cast<Eigen::Index>(pts.size()));
  for (std::size_t i = 0; i < pts.size(); ++i) m.col(static_cast<Eigen::Index>(i)) << pts[i].x, pts[i].y;
  Eigen::VectorXd v(m.cols());
  if (m.cols() == 0) return v;
  const BatchJets j = a.net.forward_batch(m);
  for (Eigen::Index i = 0; i < m.cols(); ++i) {
    const Point p = pts[static_cast<std::size_t>(i)];
    v[i] = boundary_distance(p).value * j.out[i] + a.g(p);
  }
  return v;
}

}  // namespace dwr
