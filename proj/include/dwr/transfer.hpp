#pragma once

// Transfers between Q1 and Q2 spaces on one mesh, nodal interpolation of
// analytic functions and point evaluation.

#include <functional>
#include <vector>

#include "dwr/fe_space.hpp"

namespace dwr {

namespace detail {

// Evaluates `src` at the local nodes of `dst` cell by cell.
inline Eigen::VectorXd transfer_nodal(const FeFunction& src, const FeSpace& dst) {
  const int pd = dst.degree();
  const int n1 = pd + 1;
  std::vector<ShapeTable> tables;
  for (int b = 0; b < n1; ++b)
    for (int a = 0; a < n1; ++a)
      tables.push_back(ShapeTable::at(src.space().degree(), {double(a) / pd, double(b) / pd}));
  Eigen::VectorXd out = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(dst.n_dofs()));
  for (std::size_t k = 0; k < dst.n_cells(); ++k) {
    const auto dofs = dst.cell_dofs(k);
    for (int i = 0; i < dst.dofs_per_cell(); ++i) {
      if (dst.is_constrained(dofs[i])) continue;
      out[dofs[i]] = src.eval_with(k, tables[i]).value;
    }
  }
  dst.apply_constraints(out);
  return out;
}

}  // namespace detail

/// Exact embedding of a Q1 function into the Q2 space on the same mesh.
inline FeFunction interpolate_to_enriched(const FeFunction& u, std::shared_ptr<const FeSpace> q2) {
  detail::require(u.space().degree() == 1, "interpolate_to_enriched: source must be Q1");
  detail::require(q2->degree() == 2, "interpolate_to_enriched: target must be Q2");
  detail::require(same_mesh(u.space(), *q2), "interpolate_to_enriched: mesh mismatch");
  auto v = detail::transfer_nodal(u, *q2);
  return FeFunction(std::move(q2), std::move(v));
}

/// Q1 function whose nodal values are the Q2 function at the Q1 nodes.
inline FeFunction restrict_to_q1(const FeFunction& z, std::shared_ptr<const FeSpace> q1) {
  detail::require(z.space().degree() == 2, "restrict_to_q1: source must be Q2");
  detail::require(q1->degree() == 1, "restrict_to_q1: target must be Q1");
  detail::require(same_mesh(z.space(), *q1), "restrict_to_q1: mesh mismatch");
  auto v = detail::transfer_nodal(z, *q1);
  return FeFunction(std::move(q1), std::move(v));
}

/// Nodal interpolant of an analytic function.
inline FeFunction interpolate(std::shared_ptr<const FeSpace> space,
                              const std::function<double(Point)>& fn) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(space->n_dofs()));
  for (std::uint32_t d = 0; d < space->n_dofs(); ++d) v[d] = fn(space->dof_coord(d));
  space->apply_constraints(v);
  return FeFunction(std::move(space), std::move(v));
}

/// Conforming basis function attached to an unconstrained dof.
inline FeFunction basis_function(std::shared_ptr<const FeSpace> space, std::uint32_t dof) {
  detail::require(dof < space->n_dofs() && !space->is_constrained(dof),
                  "basis_function: dof must be unconstrained");
  Eigen::VectorXd v = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(space->n_dofs()));
  v[dof] = 1.0;
  space->apply_constraints(v);
  return FeFunction(std::move(space), std::move(v));
}

/// Value and gradient at each point; a point on a cell interface belongs to
/// the active cell with the lowest iteration index.
inline std::vector<ValueGrad> evaluate_at_points(const FeFunction& u, std::span<const Point> pts) {
  const Mesh& mesh = u.space().mesh();
  std::vector<ValueGrad> out;
  out.reserve(pts.size());
  for (Point p : pts) {
    const std::size_t cell = mesh.locate(p);
    out.push_back(u.eval_on_cell(cell, to_reference(mesh, cell, p)));
  }
  return out;
}

}  // namespace dwr
