#pragma once

// Assembly and solution of the Dirichlet-condensed primal and adjoint
// problems. Hanging and boundary dofs are eliminated: every local basis
// function is expanded onto free dofs, so A_free = C^T A C.

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>
#include <algorithm>
#include <array>
#include <cmath>
#include <vector>

#include "dwr/errors.hpp"
#include "dwr/fe_space.hpp"
#include "dwr/field.hpp"

namespace dwr {

using SparseMatrix = Eigen::SparseMatrix<double>;

struct LinearSystem {
  SparseMatrix matrix;
  Eigen::VectorXd rhs;
};

namespace detail {

using LocalMatrix = Eigen::Matrix<double, 9, 9>;
using LocalVector = Eigen::Matrix<double, 9, 1>;

struct FreeEntry {
  std::int32_t index;
  double weight;
};

// Per-cell local dof -> free dofs expansion, flattened.
class FreeMap {
 public:
  explicit FreeMap(const FeSpace& space) : per_cell_(space.dofs_per_cell()) {
    offsets_.push_back(0);
    for (std::size_t k = 0; k < space.n_cells(); ++k) {
      for (std::uint32_t d : space.cell_dofs(k)) {
        for (const auto& e : space.expansion(d)) {
          const std::int32_t f = space.free_index(e.dof);
          if (f >= 0) entries_.push_back({f, e.weight});
        }
        offsets_.push_back(entries_.size());
      }
    }
  }
  std::span<const FreeEntry> local(std::size_t cell, int i) const {
    const std::size_t j = cell * static_cast<std::size_t>(per_cell_) + static_cast<std::size_t>(i);
    return {entries_.data() + offsets_[j], offsets_[j + 1] - offsets_[j]};
  }

 private:
  int per_cell_;
  std::vector<std::size_t> offsets_;
  std::vector<FreeEntry> entries_;
};

// kernel(cell, Ke, Fe) fills the local matrix (if requested) and vector.
template <typename Kernel>
LinearSystem assemble(const FeSpace& space, const FreeMap& map, bool with_matrix, Kernel&& kernel) {
  const int n = space.dofs_per_cell();
  const auto nf = static_cast<Eigen::Index>(space.n_free());
  LinearSystem sys;
  sys.rhs = Eigen::VectorXd::Zero(nf);
  std::vector<Eigen::Triplet<double>> trip;
  if (with_matrix) trip.reserve(space.n_cells() * static_cast<std::size_t>(n * n) * 2);
  LocalMatrix Ke;
  LocalVector Fe;
  for (std::size_t k = 0; k < space.n_cells(); ++k) {
    Ke.setZero();
    Fe.setZero();
    kernel(k, Ke, Fe);
    for (int i = 0; i < n; ++i) {
      const auto ei = map.local(k, i);
      for (const auto& a : ei) sys.rhs[a.index] += a.weight * Fe[i];
      if (!with_matrix) continue;
      for (int j = 0; j < n; ++j) {
        for (const auto& a : ei)
          for (const auto& b : map.local(k, j))
            trip.emplace_back(a.index, b.index, a.weight * b.weight * Ke(i, j));
      }
    }
  }
  if (with_matrix) {
    sys.matrix.resize(nf, nf);
    sys.matrix.setFromTriplets(trip.begin(), trip.end());
  }
  return sys;
}

// Full coefficient vector from free values: boundary 0, hanging by constraint.
inline Eigen::VectorXd expand_free(const FeSpace& space, const Eigen::VectorXd& x) {
  Eigen::VectorXd u = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(space.n_dofs()));
  for (std::uint32_t d = 0; d < space.n_dofs(); ++d) {
    const std::int32_t f = space.free_index(d);
    if (f >= 0) u[d] = x[f];
  }
  space.apply_constraints(u);
  return u;
}

inline Eigen::VectorXd gather_free(const FeSpace& space, const Eigen::VectorXd& u) {
  Eigen::VectorXd x(static_cast<Eigen::Index>(space.n_free()));
  for (std::uint32_t d = 0; d < space.n_dofs(); ++d) {
    const std::int32_t f = space.free_index(d);
    if (f >= 0) x[f] = u[d];
  }
  return x;
}

}  // namespace detail

/// Sparse SPD solve with iterative refinement to the requested relative residual.
class SpdSolver {
 public:
  void analyze(const SparseMatrix& A) {
    ldlt_.analyzePattern(A);
    analyzed_ = true;
  }

  void factorize(const SparseMatrix& A) {
    if (!analyzed_) analyze(A);
    ldlt_.factorize(A);
    if (ldlt_.info() != Eigen::Success) throw SolverError("SpdSolver: factorization failed");
    if ((ldlt_.vectorD().array() <= 0.0).any()) {
      throw SolverError("SpdSolver: matrix is not positive definite");
    }
    A_ = &A;
    a_norm_ = 0.0;
    for (Eigen::Index j = 0; j < A.outerSize(); ++j) {
      double sum = 0.0;
      for (SparseMatrix::InnerIterator it(A, j); it; ++it) sum += std::abs(it.value());
      a_norm_ = std::max(a_norm_, sum);
    }
  }

  /// Refines until the normwise backward error |b - Ax| / (|A| |x| + |b|)
  /// (infinity norms) is at most rel_tol.
  Eigen::VectorXd solve(const Eigen::VectorXd& b, double rel_tol = 1e-12) const {
    if (b.size() == 0) return b;
    const double bn = b.lpNorm<Eigen::Infinity>();
    if (bn == 0.0) return Eigen::VectorXd::Zero(b.size());
    Eigen::VectorXd x = ldlt_.solve(b);
    auto backward_error = [&](const Eigen::VectorXd& r) {
      return r.lpNorm<Eigen::Infinity>() / (a_norm_ * x.lpNorm<Eigen::Infinity>() + bn);
    };
    for (int it = 0; it < 3; ++it) {
      const Eigen::VectorXd r = b - (*A_) * x;
      if (backward_error(r) <= 1e-2 * rel_tol) return x;
      x += ldlt_.solve(r);
    }
    if (backward_error(b - (*A_) * x) > rel_tol) throw SolverError("SpdSolver: residual tolerance not reached");
    return x;
  }

 private:
  Eigen::SimplicialLDLT<SparseMatrix, Eigen::Lower, Eigen::AMDOrdering<int>> ldlt_;
  const SparseMatrix* A_ = nullptr;
  double a_norm_ = 0.0;  // infinity norm (A is symmetric)
  bool analyzed_ = false;
};

/// Condensed system of (grad u, grad v) + (c u, v) = (r, v).
inline LinearSystem assemble_reaction_diffusion(const FeSpace& space, const ScalarField& reaction,
                                                const ScalarField& rhs) {
  const detail::FreeMap map(space);
  const Mesh& mesh = space.mesh();
  const auto& rule = gauss3x3();
  const auto& shapes = shapes_at_gauss(space.degree());
  const int n = space.dofs_per_cell();
  const bool has_reaction = !reaction.is_zero();
  return detail::assemble(space, map, true, [&](std::size_t k, auto& Ke, auto& Fe) {
    const double h = mesh.active_cell(k).size();
    const double area = h * h;
    for (int q = 0; q < 9; ++q) {
      const auto& s = shapes[q];
      const Point x = to_physical(mesh, k, rule[q].ref);
      const double w = rule[q].weight * area;
      const double c = has_reaction ? reaction.on_cell(mesh, k, rule[q].ref, x) : 0.0;
      const double r = rhs.on_cell(mesh, k, rule[q].ref, x);
      for (int i = 0; i < n; ++i) {
        Fe[i] += w * r * s.value[i];
        for (int j = 0; j < n; ++j) {
          // Reference gradients scale by 1/h each; the area factor cancels h^2.
          Ke(i, j) += rule[q].weight * dot(s.ref_grad[i], s.ref_grad[j]) + w * c * s.value[i] * s.value[j];
        }
      }
    }
  });
}

/// Condensed stiffness matrix (grad u, grad v).
inline SparseMatrix assemble_stiffness(const FeSpace& space) {
  return assemble_reaction_diffusion(space, ScalarField::constant(0.0), ScalarField::constant(0.0)).matrix;
}

/// Solves (grad u, grad v) + (c u, v) = (r, v) with homogeneous Dirichlet data.
inline FeFunction solve_reaction_diffusion(std::shared_ptr<const FeSpace> space,
                                           const ScalarField& reaction, const ScalarField& rhs) {
  const LinearSystem sys = assemble_reaction_diffusion(*space, reaction, rhs);
  Eigen::VectorXd x = Eigen::VectorXd::Zero(sys.rhs.size());
  if (sys.rhs.size() > 0) {
    SpdSolver solver;
    solver.factorize(sys.matrix);
    x = solver.solve(sys.rhs);
  }
  auto u = detail::expand_free(*space, x);
  return FeFunction(std::move(space), std::move(u));
}

/// -Laplace(u) = f, u = 0 on the boundary.
inline FeFunction solve_primal_poisson(std::shared_ptr<const FeSpace> space, const ScalarField& f) {
  return solve_reaction_diffusion(std::move(space), ScalarField::constant(0.0), f);
}

struct NewtonOptions {
  double tol = 1e-10;  // absolute l2 norm of the condensed residual
  int max_iterations = 20;
};

struct NewtonReport {
  int iterations = 0;
  std::vector<double> residual_norms;   // before each step, plus the final one
  std::vector<double> increment_norms;  // l2 norm of each Newton update
};

struct SemilinearSolution {
  FeFunction u;
  NewtonReport report;
};

/// -Laplace(u) + gamma u^2 = f, u = 0 on the boundary, by full-step Newton from u = 0.
inline SemilinearSolution solve_primal_semilinear(std::shared_ptr<const FeSpace> space,
                                                  const ScalarField& f, double gamma,
                                                  NewtonOptions opts = {}) {
  detail::require(gamma > 0.0, "solve_primal_semilinear: gamma must be positive");
  const FeSpace& sp = *space;
  const detail::FreeMap map(sp);
  const Mesh& mesh = sp.mesh();
  const auto& rule = gauss3x3();
  const auto& shapes = shapes_at_gauss(sp.degree());
  const int n = sp.dofs_per_cell();

  std::vector<double> fq(sp.n_cells() * 9);
  for (std::size_t k = 0; k < sp.n_cells(); ++k)
    for (int q = 0; q < 9; ++q)
      fq[k * 9 + q] = f.on_cell(mesh, k, rule[q].ref, to_physical(mesh, k, rule[q].ref));

  Eigen::VectorXd x = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(sp.n_free()));
  NewtonReport report;
  SpdSolver solver;
  for (int it = 0;; ++it) {
    const FeFunction u(space, detail::expand_free(sp, x));
    const LinearSystem sys = detail::assemble(sp, map, true, [&](std::size_t k, auto& Ke, auto& Fe) {
      const double area = std::pow(mesh.active_cell(k).size(), 2);
      for (int q = 0; q < 9; ++q) {
        const auto& s = shapes[q];
        const ValueGrad uq = u.eval_with(k, s);
        const double w = rule[q].weight * area;
        for (int i = 0; i < n; ++i) {
          const Point gi = (1.0 / mesh.active_cell(k).size()) * s.ref_grad[i];
          // Fe holds the negative residual.
          Fe[i] -= w * (dot(uq.grad, gi) + gamma * uq.value * uq.value * s.value[i] - fq[k * 9 + q] * s.value[i]);
          for (int j = 0; j < n; ++j) {
            Ke(i, j) += rule[q].weight * dot(s.ref_grad[i], s.ref_grad[j]) +
                        w * 2.0 * gamma * uq.value * s.value[i] * s.value[j];
          }
        }
      }
    });
    const double rn = sys.rhs.norm();
    report.residual_norms.push_back(rn);
    if (rn <= opts.tol) {
      report.iterations = it;
      return {u, report};
    }
    if (it == opts.max_iterations) {
      throw NonConvergence("solve_primal_semilinear: Newton did not converge in " +
                           std::to_string(opts.max_iterations) + " iterations");
    }
    solver.factorize(sys.matrix);
    const Eigen::VectorXd dx = solver.solve(sys.rhs);
    report.increment_norms.push_back(dx.norm());
    x += dx;
  }
}

}  // namespace dwr
