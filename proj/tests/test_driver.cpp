#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

#include "dwr/driver.hpp"

using namespace dwr;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("dwr_test_driver_" + name);
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

ExperimentConfig base(const std::string& name, const std::string& extra = "") {
  const fs::path dir = scratch(name);
  std::map<std::string, std::string> kv = {{"pde", "poisson"},
                                           {"goal", "mean"},
                                           {"reference_depth", "6"},
                                           {"timing", "false"},
                                           {"output_dir", (dir / "out").string()},
                                           {"cache_dir", (dir / "cache").string()}};
  std::istringstream in(extra);
  for (std::string line; std::getline(in, line);) {
    const auto eq = line.find('=');
    kv[detail::trim(line.substr(0, eq))] = detail::trim(line.substr(eq + 1));
  }
  std::string text;
  for (const auto& [k, v] : kv) text += k + " = " + v + "\n";
  return parse_config(text);
}

}  // namespace

TEST(Config, DefaultsAndComments) {
  const auto c = parse_config("# only a comment\n\n  goal = regional   # trailing\n");
  EXPECT_EQ(c.goal.kind, GoalKind::RegionalMean);
  EXPECT_EQ(c.pde.kind, PdeKind::Poisson);
  EXPECT_EQ(c.source_value, 1.0);
  EXPECT_EQ(c.max_levels, 6);
  EXPECT_EQ(c.backend, AdjointBackend::Fem);
  EXPECT_EQ(c.nn.layers, (std::vector<int>{2, 32, 32, 1}));
  EXPECT_FALSE(c.reference_depth.has_value());
}

TEST(Config, ParsesEveryKey) {
  const auto c = parse_config(
      "pde = semilinear\nsource = 2\ngamma = 10\ngoal = mean_squared\nadjoint_backend = nn\n"
      "refinement = adaptive\nmarking = top_fraction\nmarking_param = 0.25\ninitial_cells = 4\n"
      "max_levels = 3\nstop_tol = 1e-9\nseed = 42\noutput_dir = a/b\ncache_dir = c\nreference_depth = 5\n"
      "timing = false\nnn.layers = 2, 16, 1\nnn.collocation = uniform:300\nnn.retrain = once\n"
      "nn.max_epochs = 10\nnn.stop_tol = 1e-6\nnn.patience = 3\nnn.lbfgs_history = 4\nnn.adam_lr = 0.01\n"
      "nn.adam_steps = 7\nnn.restart_limit = 2\nnn.save_snapshots = true\n");
  EXPECT_EQ(c.pde.kind, PdeKind::Semilinear);
  EXPECT_EQ(c.pde.source(Point{0.3, 0.3}), 2.0);
  EXPECT_EQ(c.pde.gamma, 10.0);
  EXPECT_EQ(c.goal.kind, GoalKind::MeanSquared);
  EXPECT_EQ(c.backend, AdjointBackend::Nn);
  EXPECT_EQ(c.refinement, RefinementMode::Adaptive);
  EXPECT_EQ(c.marking.kind, MarkingStrategy::Kind::TopFraction);
  EXPECT_EQ(c.marking.param, 0.25);
  EXPECT_EQ(c.initial_cells, 4);
  EXPECT_EQ(c.max_levels, 3);
  EXPECT_EQ(c.stop_tol, 1e-9);
  EXPECT_EQ(c.seed, 42u);
  EXPECT_EQ(c.nn.train.seed, 42u);
  EXPECT_EQ(c.resolved_cache_dir(), "c");
  EXPECT_EQ(*c.reference_depth, 5);
  EXPECT_FALSE(c.timing);
  EXPECT_EQ(c.nn.layers, (std::vector<int>{2, 16, 1}));
  EXPECT_EQ(c.nn.train.collocation.kind, CollocationKind::UniformRandom);
  EXPECT_EQ(c.nn.train.collocation.n, 300u);
  EXPECT_EQ(c.nn.retrain, RetrainPolicy::Once);
  EXPECT_EQ(c.nn.train.max_epochs, 10);
  EXPECT_EQ(c.nn.train.stop_tol, 1e-6);
  EXPECT_EQ(c.nn.train.patience, 3);
  EXPECT_EQ(c.nn.train.lbfgs_history, 4);
  EXPECT_EQ(c.nn.train.adam_lr, 0.01);
  EXPECT_EQ(c.nn.train.adam_steps, 7);
  EXPECT_EQ(c.nn.train.restart_limit, 2);
  EXPECT_TRUE(c.nn.save_snapshots);
}

TEST(Config, RejectsBadInput) {
  for (const char* text : {"colour = red\n", "goal = median\n", "max_levels = 0\n", "stop_tol = 0\n",
                           "stop_tol = -1\n", "max_levels = 2.5\n", "goal mean\n", "goal = mean\ngoal = mean\n",
                           "initial_cells = 3\n", "marking_param = 1.5\n", "nn.layers = 3,8,1\n",
                           "nn.collocation = grid\n", "nn.collocation = uniform:0\n", "timing = maybe\n",
                           "seed = -1\n", "pde = semilinear\ngamma = 0\n", "nn.patience = 0\n", "= 3\n"}) {
    EXPECT_THROW(parse_config(text), ConfigError) << text;
  }
  EXPECT_THROW(load_config("/nonexistent/dwr.cfg"), ConfigError);
}

TEST(Config, DefaultCacheSitsBesideOutput) {
  const auto c = parse_config("output_dir = out/exp1\n");
  EXPECT_EQ(c.resolved_cache_dir(), "out/cache");
}

TEST(Driver, HugeToleranceGivesSingleRow) {
  auto c = base("single", "stop_tol = 1e10\nrefinement = adaptive\n");
  const auto res = run_experiment(c);
  ASSERT_EQ(res.rows.size(), 1u);
  EXPECT_EQ(res.rows[0].level, 0);
  EXPECT_TRUE(res.levels[0].marked_boxes.empty());
  EXPECT_TRUE(fs::exists(fs::path(c.output_dir) / "mesh_L0.svg"));
  EXPECT_FALSE(fs::exists(fs::path(c.output_dir) / "mesh_L1.svg"));
}

TEST(Driver, UniformDofSequence) {
  const auto res = run_experiment(base("uniform"));
  std::vector<std::size_t> dofs;
  for (const auto& r : res.rows) dofs.push_back(r.n_dofs);
  EXPECT_EQ(dofs, (std::vector<std::size_t>{9, 25, 81, 289, 1089, 4225}));
}

TEST(Driver, CsvSchemaAndFormatting) {
  const auto c = base("csv", "max_levels = 2\n");
  run_experiment(c);
  std::ifstream in(fs::path(c.output_dir) / "results.csv");
  std::string header, line;
  std::getline(in, header);
  EXPECT_EQ(header, "level,n_dofs,j_err,est_error,i_eff,wall_time_s,adjoint_backend");
  std::getline(in, line);
  EXPECT_EQ(line.rfind("0,9,", 0), 0u) << line;
  EXPECT_NE(line.find("e-02,"), std::string::npos) << line;
  EXPECT_NE(line.find(",0.000000e+00,fem"), std::string::npos) << line;
}

TEST(Driver, FemRowsAreByteIdentical) {
  auto c = base("repeat", "max_levels = 4\nrefinement = adaptive\ngoal = regional\ninitial_cells = 4\n");
  run_experiment(c);
  const std::string first = slurp(fs::path(c.output_dir) / "results.csv");
  const std::string svg = slurp(fs::path(c.output_dir) / "mesh_L2.svg");
  run_experiment(c);
  EXPECT_EQ(slurp(fs::path(c.output_dir) / "results.csv"), first);
  EXPECT_EQ(slurp(fs::path(c.output_dir) / "mesh_L2.svg"), svg);
}

TEST(Driver, NnRowsAreByteIdenticalForEqualSeed) {
  const std::string extra =
      "adjoint_backend = nn\nmax_levels = 2\nnn.layers = 2,8,1\nnn.max_epochs = 20\nnn.collocation = uniform:100\n";
  auto c = base("nn_repeat", extra);
  run_experiment(c);
  const std::string first = slurp(fs::path(c.output_dir) / "results.csv");
  EXPECT_TRUE(fs::exists(fs::path(c.output_dir) / "loss_L0.csv"));
  EXPECT_FALSE(fs::exists(fs::path(c.output_dir) / "loss_L1.csv"));  // trained once
  run_experiment(c);
  EXPECT_EQ(slurp(fs::path(c.output_dir) / "results.csv"), first);
  c.set_seed(1);
  run_experiment(c);
  EXPECT_NE(slurp(fs::path(c.output_dir) / "results.csv"), first);
}

TEST(Driver, EffectivityMatchesRowValues) {
  for (const char* extra : {"goal = mean\n", "goal = mean_squared\nrefinement = adaptive\n",
                            "pde = semilinear\nrefinement = adaptive\nmax_levels = 4\n"}) {
    const auto res = run_experiment(base("ieff", extra));
    for (const auto& r : res.rows) {
      EXPECT_NEAR(r.i_eff, std::abs(r.est_error) / std::abs(r.j_err), 1e-12 * r.i_eff) << extra;
    }
  }
}

TEST(Driver, SemilinearRecordsNewtonIterations) {
  const auto res = run_experiment(base("newton", "pde = semilinear\nmax_levels = 3\n"));
  for (const auto& l : res.levels) {
    ASSERT_TRUE(l.newton_iterations.has_value());
    EXPECT_LE(*l.newton_iterations, 8);
  }
}

TEST(Driver, AdaptiveMarksAndRefines) {
  const auto res = run_experiment(base("adaptive", "refinement = adaptive\ngoal = regional\ninitial_cells = 4\n"
                                                   "max_levels = 3\n"));
  ASSERT_EQ(res.rows.size(), 3u);
  EXPECT_FALSE(res.levels[0].marked_boxes.empty());
  EXPECT_LT(res.levels[0].marked_boxes.size(), res.levels[0].n_cells);
  EXPECT_GT(res.rows[1].n_dofs, res.rows[0].n_dofs);
}

TEST(Driver, DivergentTrainingFallsBackToFem) {
  auto c = base("fallback", "adjoint_backend = nn\nmax_levels = 2\nnn.layers = 2,4,1\nnn.restart_limit = 1\n"
                            "nn.collocation = uniform:20\n");
  c.nn.train.fault_injection = [](int, Eigen::VectorXd& x) {
    x[0] = std::numeric_limits<double>::infinity();
    return true;
  };
  const auto res = run_experiment(c);
  EXPECT_TRUE(res.fallback_triggered);
  ASSERT_EQ(res.rows.size(), 2u);
  for (const auto& r : res.rows) EXPECT_EQ(r.adjoint_backend, "fem_fallback");

  auto fem = base("fallback_fem", "max_levels = 2\n");
  const auto ref = run_experiment(fem);
  EXPECT_EQ(res.rows[1].est_error, ref.rows[1].est_error);
}

TEST(Reference, ZeroSourceGivesZero) {
  for (const char* goal : {"mean", "regional", "mean_squared"}) {
    for (const char* pde : {"poisson", "semilinear"}) {
      auto c = base("zero", std::string("source = 0\ngoal = ") + goal + "\npde = " + pde + "\nreference_depth = 3\n");
      EXPECT_EQ(compute_reference(c), 0.0) << goal << " " << pde;
    }
  }
}

TEST(Reference, CachedAndReused) {
  auto c = base("cache", "reference_depth = 4\n");
  const double j = compute_reference(c);
  const fs::path dir = c.resolved_cache_dir();
  std::vector<fs::path> files(fs::directory_iterator(dir), fs::directory_iterator{});
  ASSERT_EQ(files.size(), 1u);
  EXPECT_EQ(reference_value(c.forms(), 4), j);
  {
    std::ofstream out(files[0]);
    out << "0x1p-1\n";
  }
  EXPECT_EQ(compute_reference(c), 0.5);
  c.reference_depth = 3;
  EXPECT_NE(compute_reference(c), 0.5);
}

TEST(Reference, StableUnderFurtherRefinement) {
  const ProblemForms f{{PdeKind::Poisson, ScalarField::constant(1.0), 0.0}, {GoalKind::MeanValue}};
  const double coarse_error = std::abs(reference_value(f, 7) - 3.0 / 128.0);  // 2x2 Q1 value
  EXPECT_LT(std::abs(reference_value(f, 8) - reference_value(f, 7)), 0.01 * coarse_error);
}

TEST(Reference, FemRunConvergesMonotonicallyToReference) {
  const auto res = run_experiment(base("monotone", "reference_depth = 8\n"));
  for (std::size_t i = 1; i < res.rows.size(); ++i) {
    EXPECT_GT(res.rows[i].j_err, 0.0);
    EXPECT_LT(res.rows[i].j_err, res.rows[i - 1].j_err);
  }
}
