#pragma once

// Residual forms, partition-of-unity error localization, effectivity index
// and cell marking.
//
//   rho(u)(w)       = (f, w) - (grad u, grad w) - gamma (u^2, w)
//   rho*(u, z)(w)   = J'(u)(w) - (grad w, grad z) - 2 gamma (u w, z)
//
// The indicator of Q1 node i is
//   eta_i = wp * rho(u)((z2 - z~) psi_i) + wa * rho*(u, z~)((u2 - u) psi_i)
// with psi_i the conforming Q1 hat function of node i (boundary nodes
// included so that the psi_i sum to one).

#include <algorithm>
#include <concepts>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <vector>

#include "dwr/ansatz.hpp"
#include "dwr/goal.hpp"
#include "dwr/problem.hpp"
#include "dwr/transfer.hpp"

namespace dwr {

namespace detail {

// Calls fn(cell, q, x, w, ref, in_region) for every quadrature point of the mesh,
// with w the physical quadrature weight.
template <typename Fn>
void for_each_quadrature_point(const Mesh& mesh, const GoalFunctional& goal, Fn&& fn) {
  const auto& rule = gauss3x3();
  for (std::size_t k = 0; k < mesh.n_active(); ++k) {
    const Box b = mesh.active_cell(k).box();
    const bool in_region = goal.kind == GoalKind::RegionalMean && cell_in_goal_region(b);
    for (int q = 0; q < 9; ++q) {
      fn(k, q, to_physical(mesh, k, rule[q].ref), rule[q].weight * b.area(), rule[q].ref, in_region);
    }
  }
}

inline double primal_density(const ProblemForms& forms, double f, const ValueGrad& u, const ValueGrad& w) {
  const double gamma = forms.pde.reaction_coefficient();
  return f * w.value - dot(u.grad, w.grad) - gamma * u.value * u.value * w.value;
}

inline double adjoint_density(const ProblemForms& forms, bool in_region, const ValueGrad& u, const ValueGrad& z,
                              const ValueGrad& w) {
  const double gamma = forms.pde.reaction_coefficient();
  return forms.goal.derivative_density(u.value, in_region) * w.value - dot(w.grad, z.grad) -
         2.0 * gamma * u.value * w.value * z.value;
}

inline void require_same_mesh(const FeFunction& a, const FeFunction& b, const char* what) {
  if (!same_mesh(a.space(), b.space())) throw InvalidArgument(std::string(what) + ": mesh mismatch");
}

}  // namespace detail

/// rho(u)(w) for a weight given as weight(cell, ref, x) -> ValueGrad on the mesh of u.
template <typename Weight>
  requires std::invocable<Weight, std::size_t, Point, Point>
double primal_residual(const ProblemForms& forms, const FeFunction& u, Weight&& weight) {
  const Mesh& mesh = u.space().mesh();
  double sum = 0.0;
  detail::for_each_quadrature_point(mesh, forms.goal, [&](std::size_t k, int, Point x, double w, Point ref, bool) {
    const double f = forms.pde.source.on_cell(mesh, k, ref, x);
    sum += w * detail::primal_density(forms, f, u.eval_on_cell(k, ref), weight(k, ref, x));
  });
  return sum;
}

inline double primal_residual(const ProblemForms& forms, const FeFunction& u, const FeFunction& weight) {
  detail::require_same_mesh(u, weight, "primal_residual");
  return primal_residual(forms, u, [&](std::size_t k, Point ref, Point) { return weight.eval_on_cell(k, ref); });
}

/// rho*(u, z)(w) for a weight given as weight(cell, ref, x) -> ValueGrad.
template <typename Weight>
  requires std::invocable<Weight, std::size_t, Point, Point>
double adjoint_residual(const ProblemForms& forms, const FeFunction& u, const FeFunction& z, Weight&& weight) {
  detail::require_same_mesh(u, z, "adjoint_residual");
  const Mesh& mesh = u.space().mesh();
  double sum = 0.0;
  detail::for_each_quadrature_point(mesh, forms.goal,
                                    [&](std::size_t k, int, Point x, double w, Point ref, bool in_region) {
                                      sum += w * detail::adjoint_density(forms, in_region, u.eval_on_cell(k, ref),
                                                                         z.eval_on_cell(k, ref), weight(k, ref, x));
                                    });
  return sum;
}

inline double adjoint_residual(const ProblemForms& forms, const FeFunction& u, const FeFunction& z,
                               const FeFunction& weight) {
  detail::require_same_mesh(u, weight, "adjoint_residual");
  return adjoint_residual(forms, u, z, [&](std::size_t k, Point ref, Point) { return weight.eval_on_cell(k, ref); });
}

/// Q2 function with the ansatz values at the dof coordinates.
inline FeFunction project_nn(const BoundaryAnsatz& a, std::shared_ptr<const FeSpace> space2) {
  detail::require(space2->degree() == 2, "project_nn: space must be Q2");
  const auto coords = space2->dof_coords();
  Eigen::VectorXd v = ansatz_values(a, std::vector<Point>(coords.begin(), coords.end()));
  for (std::uint32_t d = 0; d < space2->n_dofs(); ++d)
    if (space2->is_boundary(d)) v[d] = a.g(space2->dof_coord(d));
  space2->apply_constraints(v);
  return FeFunction(std::move(space2), std::move(v));
}

struct Effectivity {
  double value = 0.0;
  bool zero_error = false;     // true error vanished: value is +inf
  bool zero_estimate = false;  // estimate vanished: index undefined, value 0
};

inline Effectivity effectivity(double eta_total, double j_ref, double j_uh) {
  Effectivity e;
  const double err = std::abs(j_ref - j_uh);
  if (err == 0.0) {
    e.zero_error = true;
    e.value = std::numeric_limits<double>::infinity();
  } else {
    e.value = std::abs(eta_total) / err;
  }
  e.zero_estimate = eta_total == 0.0;
  return e;
}

enum class EstimatorForm {
  Auto,        // PrimalOnly when u2 is the embedding of u, TwoTerm otherwise
  PrimalOnly,  // eta = rho(u)(z2 - z~)
  TwoTerm,     // eta = 1/2 rho(u)(z2 - z~) + 1/2 rho*(u, z~)(u2 - u)
};

struct EstimatorReport {
  Eigen::VectorXd node_indicators;  // per Q1 dof; zero on hanging nodes
  Eigen::VectorXd primal_part;      // unweighted rho((z2 - z~) psi_i)
  Eigen::VectorXd adjoint_part;     // unweighted rho*((u2 - u) psi_i)
  double primal_weight = 1.0;
  double adjoint_weight = 0.0;
  double eta_total = 0.0;
  double eta_abs_localized = 0.0;
  double eta_unlocalized = 0.0;  // same estimate with psi = 1
  std::vector<double> cell_scores;
  double j_uh = 0.0;
  std::optional<double> j_ref;
  Effectivity i_eff;

  void set_reference(double jr) {
    j_ref = jr;
    i_eff = effectivity(eta_total, jr, j_uh);
  }
};

/// Partition-of-unity DWR estimate for the Q1 primal u1 and a Q2 adjoint z2.
/// u2_override, when given, replaces the embedding of u1 as enriched primal.
inline EstimatorReport pu_estimate(const ProblemForms& forms, const FeFunction& u1, const FeFunction& z2,
                                   std::optional<FeFunction> u2_override = std::nullopt,
                                   EstimatorForm form = EstimatorForm::Auto) {
  detail::require(u1.space().degree() == 1, "pu_estimate: primal must be Q1");
  detail::require(z2.space().degree() == 2, "pu_estimate: adjoint must be Q2");
  detail::require_same_mesh(u1, z2, "pu_estimate");
  if (u2_override) {
    detail::require(u2_override->space_ptr() == z2.space_ptr(), "pu_estimate: u2 must live in the adjoint space");
  }
  const auto& q1 = u1.space_ptr();
  const auto& q2 = z2.space_ptr();
  const Mesh& mesh = q1->mesh();

  const FeFunction u_emb = interpolate_to_enriched(u1, q2);
  const FeFunction z_tilde1 = restrict_to_q1(z2, q1);
  const FeFunction ez(q2, z2.coeffs() - interpolate_to_enriched(z_tilde1, q2).coeffs());
  const FeFunction eu(q2, u2_override ? Eigen::VectorXd(u2_override->coeffs() - u_emb.coeffs())
                                      : Eigen::VectorXd::Zero(u_emb.coeffs().size()));

  EstimatorReport rep;
  const bool two_term = form == EstimatorForm::TwoTerm || (form == EstimatorForm::Auto && u2_override.has_value());
  rep.primal_weight = two_term ? 0.5 : 1.0;
  rep.adjoint_weight = two_term ? 0.5 : 0.0;

  const auto n1 = static_cast<Eigen::Index>(q1->n_dofs());
  rep.primal_part = Eigen::VectorXd::Zero(n1);
  rep.adjoint_part = Eigen::VectorXd::Zero(n1);
  double primal_global = 0.0, adjoint_global = 0.0;

  const auto& shapes1 = shapes_at_gauss(1);
  const auto& shapes2 = shapes_at_gauss(2);
  detail::for_each_quadrature_point(mesh, forms.goal, [&](std::size_t k, int q, Point x, double w, Point ref,
                                                          bool in_region) {
    const double f = forms.pde.source.on_cell(mesh, k, ref, x);
    const ValueGrad u = u1.eval_with(k, shapes1[q]);
    const ValueGrad zt = z_tilde1.eval_with(k, shapes1[q]);
    const ValueGrad e = ez.eval_with(k, shapes2[q]);
    const ValueGrad eup = eu.eval_with(k, shapes2[q]);
    primal_global += w * detail::primal_density(forms, f, u, e);
    adjoint_global += w * detail::adjoint_density(forms, in_region, u, zt, eup);

    const double inv_h = 1.0 / mesh.active_cell(k).size();
    const auto dofs = q1->cell_dofs(k);
    for (int a = 0; a < 4; ++a) {
      const double psi = shapes1[q].value[a];
      const Point dpsi = inv_h * shapes1[q].ref_grad[a];
      const ValueGrad we{e.value * psi, psi * e.grad + e.value * dpsi};
      const ValueGrad wu{eup.value * psi, psi * eup.grad + eup.value * dpsi};
      const double rp = w * detail::primal_density(forms, f, u, we);
      const double ra = w * detail::adjoint_density(forms, in_region, u, zt, wu);
      for (const auto& c : q1->expansion(dofs[a])) {
        rep.primal_part[c.dof] += c.weight * rp;
        rep.adjoint_part[c.dof] += c.weight * ra;
      }
    }
  });

  rep.node_indicators = rep.primal_weight * rep.primal_part + rep.adjoint_weight * rep.adjoint_part;
  for (Eigen::Index i = 0; i < n1; ++i) {
    rep.eta_total += rep.node_indicators[i];
    rep.eta_abs_localized += std::abs(rep.node_indicators[i]);
  }
  rep.eta_unlocalized = rep.primal_weight * primal_global + rep.adjoint_weight * adjoint_global;

  rep.cell_scores.assign(mesh.n_active(), 0.0);
  for (std::size_t k = 0; k < mesh.n_active(); ++k)
    for (std::uint32_t d : q1->cell_dofs(k)) rep.cell_scores[k] += std::abs(rep.node_indicators[d]);

  rep.j_uh = goal_value(forms.goal, u1);
  return rep;
}

struct MarkingStrategy {
  enum class Kind { Dorfler, TopFraction };
  Kind kind = Kind::Dorfler;
  double param = 0.5;

  static MarkingStrategy dorfler(double theta) { return {Kind::Dorfler, theta}; }
  static MarkingStrategy top_fraction(double alpha) { return {Kind::TopFraction, alpha}; }
};

/// Indices of active cells to refine, in decreasing score order.
inline std::vector<std::size_t> mark_indices(std::span<const double> scores, MarkingStrategy s) {
  detail::require(s.param > 0.0 && s.param <= 1.0, "mark: parameter must lie in (0, 1]");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  std::vector<std::size_t> out;
  if (s.kind == MarkingStrategy::Kind::TopFraction) {
    const auto n = static_cast<std::size_t>(std::ceil(s.param * static_cast<double>(scores.size()) - 1e-12));
    out.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(std::min(n, order.size())));
    return out;
  }
  double total = 0.0;
  for (std::size_t i : order) total += scores[i];
  if (total <= 0.0) return out;
  double acc = 0.0;
  for (std::size_t i : order) {
    if (scores[i] <= 0.0) break;
    out.push_back(i);
    acc += scores[i];
    if (acc >= s.param * total) break;
  }
  return out;
}

inline std::vector<CellId> mark(const EstimatorReport& report, const Mesh& mesh, MarkingStrategy s) {
  detail::require(report.cell_scores.size() == mesh.n_active(), "mark: report does not match the mesh");
  std::vector<CellId> ids;
  for (std::size_t k : mark_indices(report.cell_scores, s)) ids.push_back(mesh.active_cells()[k]);
  return ids;
}

}  // namespace dwr
