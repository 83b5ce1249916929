#pragma once

// The refine loop: primal solve, enrichment, adjoint (FEM or network),
// PU estimate, marking and refinement, with CSV/SVG/loss-history output.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <unistd.h>

#include "dwr/config.hpp"
#include "dwr/svg.hpp"

namespace dwr {

struct ConvergenceRow {
  int level = 0;
  std::size_t n_dofs = 0;  // Q1 dofs of the primal space
  double j_err = 0.0;      // j_ref - j_uh
  double est_error = 0.0;  // signed eta_total
  double i_eff = 0.0;
  double wall_time_s = 0.0;
  std::string adjoint_backend;
};

struct TrainingSummary {
  double initial_loss = 0.0;
  double best_loss = 0.0;
  int epochs = 0;
  int restarts = 0;
  int adam_bursts = 0;
};

struct LevelDetail {
  std::size_t n_cells = 0;
  std::optional<int> newton_iterations;
  std::optional<TrainingSummary> training;
  std::vector<Box> marked_boxes;  // cells flagged for refinement at this level
  Effectivity effectivity;
};

struct ExperimentResult {
  double j_ref = 0.0;
  std::vector<ConvergenceRow> rows;
  std::vector<LevelDetail> levels;
  bool fallback_triggered = false;
};

inline std::string csv_header() { return "level,n_dofs,j_err,est_error,i_eff,wall_time_s,adjoint_backend"; }

inline std::string format_row(const ConvergenceRow& r) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "%d,%zu,%.6e,%.6e,%.6e,%.6e,%s", r.level, r.n_dofs, r.j_err, r.est_error, r.i_eff,
                r.wall_time_s, r.adjoint_backend.c_str());
  return buf;
}

/// Uniform depth (log2 of cells per axis) of the reference mesh.
inline int reference_depth(const ExperimentConfig& cfg) {
  if (cfg.reference_depth) return *cfg.reference_depth;
  const int d0 = static_cast<int>(std::lround(std::log2(cfg.initial_cells)));
  return std::min(d0 + cfg.max_levels - 1 + 3, 8);
}

/// Goal value of the Q2 solution on a uniform mesh with 2^depth cells per axis.
inline double reference_value(const ProblemForms& forms, int depth) {
  auto mesh = std::make_shared<const Mesh>(Mesh::uniform(1 << depth));
  auto space = FeSpace::build(mesh, 2);
  return goal_value(forms.goal, solve_primal(forms.pde, space).u);
}

namespace detail {

inline std::string reference_cache_name(const ExperimentConfig& cfg, int depth) {
  char buf[256];
  const char* pde = cfg.pde.kind == PdeKind::Poisson ? "poisson" : "semilinear";
  const double gamma = cfg.pde.kind == PdeKind::Poisson ? 0.0 : cfg.pde.gamma;
  std::snprintf(buf, sizeof buf, "ref_%s_f%a_g%a_%s_d%d.txt", pde, cfg.source_value, gamma,
                to_string(cfg.goal.kind).c_str(), depth);
  return buf;
}

inline std::optional<double> read_cached(const std::filesystem::path& p) {
  std::ifstream in(p);
  if (!in) return std::nullopt;
  std::string s;
  if (!std::getline(in, s)) return std::nullopt;
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end == s.c_str()) return std::nullopt;
  return v;
}

}  // namespace detail

/// Reference goal value, read from or written to the cache directory.
inline double compute_reference(const ExperimentConfig& cfg) {
  namespace fs = std::filesystem;
  const int depth = reference_depth(cfg);
  const fs::path dir = cfg.resolved_cache_dir();
  const fs::path file = dir / detail::reference_cache_name(cfg, depth);
  if (auto v = detail::read_cached(file)) return *v;

  const double j = reference_value(cfg.forms(), depth);
  fs::create_directories(dir);
  const fs::path tmp = fs::path(file.string() + ".tmp" + std::to_string(::getpid()));
  {
    std::ofstream out(tmp);
    if (!out) throw std::runtime_error("compute_reference: cannot write " + tmp.string());
    char buf[64];
    std::snprintf(buf, sizeof buf, "%a\n", j);
    out << buf;
  }
  fs::rename(tmp, file);
  return j;
}

namespace detail {

inline bool retrain_each_level(const ExperimentConfig& cfg) {
  switch (cfg.nn.retrain) {
    case RetrainPolicy::Once: return false;
    case RetrainPolicy::PerLevel: return true;
    case RetrainPolicy::Auto: break;
  }
  return cfg.goal.depends_on_primal() || cfg.pde.kind == PdeKind::Semilinear ||
         cfg.nn.train.collocation.kind == CollocationKind::DofCoords;
}

}  // namespace detail

/// Runs the experiment, appending one CSV row per level to
/// <output_dir>/results.csv as soon as the level completes.
inline ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  namespace fs = std::filesystem;
  using Clock = std::chrono::steady_clock;
  cfg.validate();
  const ProblemForms forms = cfg.forms();
  const fs::path out_dir = cfg.output_dir;
  fs::create_directories(out_dir);

  ExperimentResult result;
  result.j_ref = compute_reference(cfg);

  std::ofstream csv(out_dir / "results.csv");
  if (!csv) throw std::runtime_error("run_experiment: cannot write " + (out_dir / "results.csv").string());
  csv << csv_header() << '\n' << std::flush;

  auto mesh = std::make_shared<const Mesh>(Mesh::uniform(cfg.initial_cells));
  std::optional<BoundaryAnsatz> ansatz;
  if (cfg.backend == AdjointBackend::Nn) ansatz = BoundaryAnsatz{Mlp::init(cfg.nn.layers, cfg.seed)};
  const bool retrain = detail::retrain_each_level(cfg);
  bool trained = false;

  for (int level = 0; level < cfg.max_levels; ++level) {
    const auto t0 = Clock::now();
    check_goal_alignment(cfg.goal, *mesh);
    auto q1 = FeSpace::build(mesh, 1);
    auto q2 = FeSpace::build(mesh, 2);
    LevelDetail detail;
    detail.n_cells = mesh->n_active();

    PrimalSolution primal = solve_primal(cfg.pde, q1);
    if (primal.newton) detail.newton_iterations = primal.newton->iterations;
    const FeFunction u2 = interpolate_to_enriched(primal.u, q2);
    const AdjointStrongForm adj = make_adjoint_form(forms, u2);

    std::string backend = to_string(cfg.backend);
    std::optional<FeFunction> z2;
    if (cfg.backend == AdjointBackend::Nn) {
      if (!trained || retrain) {
        try {
          const auto pts = make_collocation(cfg.nn.train.collocation, *q2, cfg.seed);
          TrainResult tr = train(*ansatz, adj, pts, cfg.nn.train);
          ansatz = tr.ansatz;
          trained = true;
          detail.training = TrainingSummary{tr.initial_loss, tr.best_loss, static_cast<int>(tr.history.size()),
                                            tr.restarts, tr.adam_bursts};
          write_loss_history((out_dir / ("loss_L" + std::to_string(level) + ".csv")).string(), tr.history);
          if (cfg.nn.save_snapshots) ansatz->net.save((out_dir / ("net_L" + std::to_string(level) + ".txt")).string());
        } catch (const RestartLimitExceeded&) {
          result.fallback_triggered = true;
          backend = "fem_fallback";
          z2 = solve_adjoint_fem(q2, adj);
        }
      }
      if (!z2) z2 = project_nn(*ansatz, q2);
    } else {
      z2 = solve_adjoint_fem(q2, adj);
    }

    EstimatorReport rep = pu_estimate(forms, primal.u, *z2);
    rep.set_reference(result.j_ref);
    detail.effectivity = rep.i_eff;

    const bool done = std::abs(rep.eta_total) < cfg.stop_tol || level + 1 == cfg.max_levels;
    std::vector<CellId> flags;
    if (!done) {
      if (cfg.refinement == RefinementMode::Uniform) {
        flags.assign(mesh->active_cells().begin(), mesh->active_cells().end());
      } else {
        flags = mark(rep, *mesh, cfg.marking);
      }
      for (CellId id : flags) detail.marked_boxes.push_back(mesh->cell(id).box());
    }
    write_mesh_svg(*mesh, (out_dir / ("mesh_L" + std::to_string(level) + ".svg")).string(), rep.cell_scores);

    ConvergenceRow row;
    row.level = level;
    row.n_dofs = q1->n_dofs();
    row.j_err = result.j_ref - rep.j_uh;
    row.est_error = rep.eta_total;
    row.i_eff = rep.i_eff.value;
    row.wall_time_s = cfg.timing ? std::chrono::duration<double>(Clock::now() - t0).count() : 0.0;
    row.adjoint_backend = backend;
    csv << format_row(row) << '\n' << std::flush;
    result.rows.push_back(row);
    result.levels.push_back(std::move(detail));

    if (done) break;
    mesh = std::make_shared<const Mesh>(mesh->refine(flags));
  }
  return result;
}

}  // namespace dwr
