#pragma once

#include <string>

#include "dwr/fe_space.hpp"

namespace dwr {

enum class GoalKind { MeanValue, RegionalMean, MeanSquared };

struct GoalFunctional {
  GoalKind kind = GoalKind::MeanValue;

  /// Integration region of RegionalMean.
  static constexpr Box region() { return {{0.0, 0.0}, {0.25, 0.25}}; }
  static constexpr double domain_area = 1.0;

  bool is_linear() const { return kind != GoalKind::MeanSquared; }
  /// Whether the adjoint right-hand side depends on the primal solution.
  bool depends_on_primal() const { return kind == GoalKind::MeanSquared; }

  /// Integrand g of J'(u)(w) = \int g w.
  double derivative_density(double u, bool in_region) const {
    switch (kind) {
      case GoalKind::MeanValue: return 1.0 / domain_area;
      case GoalKind::RegionalMean: return in_region ? 1.0 / region().area() : 0.0;
      case GoalKind::MeanSquared: return 2.0 * u / domain_area;
    }
    return 0.0;
  }

  /// Integrand of J itself.
  double density(double u, bool in_region) const {
    switch (kind) {
      case GoalKind::MeanValue: return u / domain_area;
      case GoalKind::RegionalMean: return in_region ? u / region().area() : 0.0;
      case GoalKind::MeanSquared: return u * u / domain_area;
    }
    return 0.0;
  }
};

inline std::string to_string(GoalKind k) {
  switch (k) {
    case GoalKind::MeanValue: return "mean";
    case GoalKind::RegionalMean: return "regional";
    case GoalKind::MeanSquared: return "mean_squared";
  }
  return "?";
}

/// True when the (closed) cell lies inside the goal region; throws if it straddles it.
inline bool cell_in_goal_region(const Box& cell) {
  const Box d = GoalFunctional::region();
  const bool inside = cell.lo.x >= d.lo.x && cell.hi.x <= d.hi.x && cell.lo.y >= d.lo.y &&
                      cell.hi.y <= d.hi.y;
  const bool outside = cell.lo.x >= d.hi.x || cell.hi.x <= d.lo.x || cell.lo.y >= d.hi.y ||
                       cell.hi.y <= d.lo.y;
  if (!inside && !outside) {
    throw InvalidArgument("RegionalMean: a mesh cell straddles the boundary of the goal region");
  }
  return inside;
}

inline void check_goal_alignment(const GoalFunctional& goal, const Mesh& mesh) {
  if (goal.kind != GoalKind::RegionalMean) return;
  for (std::size_t k = 0; k < mesh.n_active(); ++k) cell_in_goal_region(mesh.active_cell(k).box());
}

inline double goal_value(const GoalFunctional& goal, const FeFunction& u) {
  const FeSpace& space = u.space();
  const Mesh& mesh = space.mesh();
  const auto& rule = gauss3x3();
  const auto& shapes = shapes_at_gauss(space.degree());
  double sum = 0.0;
  for (std::size_t k = 0; k < mesh.n_active(); ++k) {
    const Box b = mesh.active_cell(k).box();
    const bool in_region = goal.kind == GoalKind::RegionalMean && cell_in_goal_region(b);
    if (goal.kind == GoalKind::RegionalMean && !in_region) continue;
    double cell_sum = 0.0;
    for (int q = 0; q < 9; ++q) {
      cell_sum += rule[q].weight * goal.density(u.eval_with(k, shapes[q]).value, in_region);
    }
    sum += cell_sum * b.area();
  }
  return sum;
}

}  // namespace dwr
