#pragma once

// Mean squared strong-form residual of the adjoint ansatz over a set of
// collocation points:
//   N(z, x) = -Laplace z(x) + c(x) z(x) - r(x)
// With z = d n + g the residual is affine in the network jets,
//   N = a_v n + a_x n_x + a_y n_y + a_xx n_xx + a_yy n_yy + b,
// so the coefficients are computed once per point set.

#include <random>
#include <string>
#include <vector>

#include "dwr/ansatz.hpp"
#include "dwr/fe_space.hpp"
#include "dwr/problem.hpp"

namespace dwr {

enum class CollocationKind { DofCoords, UniformRandom };

struct CollocationSet {
  std::vector<Point> points;
  CollocationKind kind = CollocationKind::UniformRandom;
  std::uint64_t seed = 0;

  /// Interior dof coordinates of a space; boundary nodes carry no residual information.
  static CollocationSet from_dofs(const FeSpace& space) {
    CollocationSet s;
    s.kind = CollocationKind::DofCoords;
    for (std::uint32_t d = 0; d < space.n_dofs(); ++d)
      if (!space.is_boundary(d)) s.points.push_back(space.dof_coord(d));
    return s;
  }

  /// n points uniform in the open unit square.
  static CollocationSet uniform_random(std::size_t n, std::uint64_t seed) {
    CollocationSet s;
    s.seed = seed;
    std::mt19937_64 rng(detail::splitmix64(seed ^ 0xC011'0CA7ull));
    while (s.points.size() < n) {
      const Point p{detail::unit_uniform(rng), detail::unit_uniform(rng)};
      if (p.x > 0.0 && p.y > 0.0) s.points.push_back(p);
    }
    return s;
  }

  std::size_t size() const { return points.size(); }
};

/// Residual loss bound to one problem and point set.
class ResidualLoss {
 public:
  ResidualLoss(const BoundaryAnsatz& a, const AdjointStrongForm& p, const CollocationSet& pts) {
    detail::require(!pts.points.empty(), "loss: empty collocation set");
    n_ = static_cast<Eigen::Index>(pts.size());
    coords_.resize(2, n_);
    alpha_.resize(5 * n_);
    offset_.resize(n_);
    for (Eigen::Index i = 0; i < n_; ++i) {
      const Point x = pts.points[static_cast<std::size_t>(i)];
      coords_.col(i) << x.x, x.y;
      const DistanceJet d = boundary_distance(x);
      const double c = p.reaction(x);
      alpha_[kValue * n_ + i] = -d.laplacian + c * d.value;
      alpha_[kDx * n_ + i] = -2.0 * d.grad.x;
      alpha_[kDy * n_ + i] = -2.0 * d.grad.y;
      alpha_[kDxx * n_ + i] = -d.value;
      alpha_[kDyy * n_ + i] = -d.value;
      offset_[i] = -a.g_laplacian(x) + c * a.g(x) - p.rhs(x);
    }
  }

  Eigen::Index n_points() const { return n_; }

  /// Residual N at every collocation point.
  Eigen::VectorXd residuals(const Mlp& net) const { return residuals(net.forward_batch(coords_)); }

  double value(const Mlp& net) const {
    return residuals(net).squaredNorm() / static_cast<double>(n_);
  }

  double value_and_gradient(const Mlp& net, Eigen::VectorXd& grad) const {
    const BatchJets j = net.forward_batch(coords_);
    const Eigen::VectorXd r = residuals(j);
    Eigen::RowVectorXd g(5 * n_);
    const double s = 2.0 / static_cast<double>(n_);
    for (int c = 0; c < 5; ++c)
      g.segment(c * n_, n_) = (s * alpha_.segment(c * n_, n_).array() * r.array()).matrix().transpose();
    grad = net.backward(j, g);
    return r.squaredNorm() / static_cast<double>(n_);
  }

 private:
  Eigen::VectorXd residuals(const BatchJets& j) const {
    Eigen::VectorXd r = offset_;
    for (int c = 0; c < 5; ++c)
      r.array() += alpha_.segment(c * n_, n_).array() * j.component(c).transpose().array();
    return r;
  }

  Eigen::Index n_ = 0;
  Eigen::Matrix2Xd coords_;
  Eigen::VectorXd alpha_;
  Eigen::VectorXd offset_;
};

inline double loss(const BoundaryAnsatz& a, const AdjointStrongForm& p, const CollocationSet& pts) {
  return ResidualLoss(a, p, pts).value(a.net);
}

}  // namespace dwr
