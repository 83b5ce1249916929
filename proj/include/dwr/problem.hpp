#pragma once

// Model problems and the strong form of their adjoints.
//
//   Poisson:     -Laplace u = f
//   Semilinear:  -Laplace u + gamma u^2 = f
//
// both with u = 0 on the boundary of the unit square. The adjoint of either
// problem for any in-scope goal is the linear problem
//   -Laplace z + c(x) z = r(x),  z = 0 on the boundary.

#include <optional>

#include "dwr/goal.hpp"
#include "dwr/solvers.hpp"
#include "dwr/transfer.hpp"

namespace dwr {

enum class PdeKind { Poisson, Semilinear };

struct PdeProblem {
  PdeKind kind = PdeKind::Poisson;
  ScalarField source = ScalarField::constant(1.0);
  double gamma = 0.0;  // only used by Semilinear

  double reaction_coefficient() const { return kind == PdeKind::Semilinear ? gamma : 0.0; }
};

/// Everything the residual forms need: the PDE and the goal functional.
struct ProblemForms {
  PdeProblem pde;
  GoalFunctional goal;
};

/// -Laplace z + reaction * z = rhs.
struct AdjointStrongForm {
  ScalarField reaction = ScalarField::constant(0.0);
  ScalarField rhs = ScalarField::constant(0.0);
};

inline double regional_indicator(Point x) {
  return GoalFunctional::region().contains(x) ? 1.0 : 0.0;
}

/// Adjoint data linearized at the enriched primal solution u2.
inline AdjointStrongForm make_adjoint_form(const ProblemForms& forms, const FeFunction& u2) {
  AdjointStrongForm p;
  if (forms.pde.kind == PdeKind::Semilinear) p.reaction = ScalarField::fe(u2, 2.0 * forms.pde.gamma);
  switch (forms.goal.kind) {
    case GoalKind::MeanValue:
      p.rhs = ScalarField::constant(1.0 / GoalFunctional::domain_area);
      break;
    case GoalKind::RegionalMean:
      p.rhs = ScalarField::function(regional_indicator).scaled(1.0 / GoalFunctional::region().area());
      break;
    case GoalKind::MeanSquared:
      p.rhs = ScalarField::fe(u2, 2.0 / GoalFunctional::domain_area);
      break;
  }
  return p;
}

/// Galerkin solution of the adjoint problem in a Q2 space.
inline FeFunction solve_adjoint_fem(std::shared_ptr<const FeSpace> space2, const AdjointStrongForm& p) {
  detail::require(space2->degree() == 2, "solve_adjoint_fem: space must be Q2");
  return solve_reaction_diffusion(std::move(space2), p.reaction, p.rhs);
}

struct PrimalSolution {
  FeFunction u;
  std::optional<NewtonReport> newton;
};

inline PrimalSolution solve_primal(const PdeProblem& pde, std::shared_ptr<const FeSpace> space) {
  if (pde.kind == PdeKind::Poisson) return {solve_primal_poisson(std::move(space), pde.source), std::nullopt};
  auto s = solve_primal_semilinear(std::move(space), pde.source, pde.gamma);
  return {std::move(s.u), std::move(s.report)};
}

}  // namespace dwr
