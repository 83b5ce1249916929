#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <limits>

#include "dwr/train.hpp"

using namespace dwr;

namespace {

AdjointStrongForm mean_value_problem() {
  AdjointStrongForm p;
  p.rhs = ScalarField::constant(1.0);
  return p;
}

BoundaryAnsatz unit_ansatz() {
  Mlp net({2, 4, 1});
  net.bias(1)[0] = 1.0;
  return {net};
}

CollocationSet points(std::vector<Point> p) {
  CollocationSet s;
  s.points = std::move(p);
  return s;
}

double rosenbrock(const Eigen::VectorXd& x, Eigen::VectorXd& g) {
  g.resize(2);
  g[0] = -400 * x[0] * (x[1] - x[0] * x[0]) - 2 * (1 - x[0]);
  g[1] = 200 * (x[1] - x[0] * x[0]);
  return 100 * std::pow(x[1] - x[0] * x[0], 2) + std::pow(1 - x[0], 2);
}

}  // namespace

TEST(Loss, ZeroProblemZeroNet) {
  const BoundaryAnsatz a{Mlp({2, 8, 1})};
  EXPECT_EQ(loss(a, AdjointStrongForm{}, CollocationSet::uniform_random(50, 1)), 0.0);
}

TEST(Loss, HandEvaluatedResiduals) {
  const auto p = mean_value_problem();
  EXPECT_NEAR(loss(unit_ansatz(), p, points({{0.5, 0.5}})), 0.0, 1e-30);
  EXPECT_NEAR(loss(unit_ansatz(), p, points({{0.25, 0.25}})), 0.0625, 1e-15);
  EXPECT_NEAR(loss(unit_ansatz(), p, points({{0.5, 0.5}, {0.25, 0.25}})), 0.03125, 1e-15);
}

TEST(Loss, PermutationInvariant) {
  const BoundaryAnsatz a{Mlp::init({2, 8, 8, 1}, 3)};
  auto pts = CollocationSet::uniform_random(64, 2);
  const double l0 = loss(a, mean_value_problem(), pts);
  std::reverse(pts.points.begin(), pts.points.end());
  EXPECT_NEAR(loss(a, mean_value_problem(), pts), l0, 1e-15 * l0);
}

TEST(Loss, EmptySetRejected) {
  EXPECT_THROW(loss(unit_ansatz(), mean_value_problem(), CollocationSet{}), InvalidArgument);
}

TEST(Loss, ReactionTermEntersResidual) {
  AdjointStrongForm p;
  p.reaction = ScalarField::constant(3.0);
  // z = d, -Laplace d + 3 d at the center: 1 + 3/16.
  EXPECT_NEAR(loss(unit_ansatz(), p, points({{0.5, 0.5}})), std::pow(1.0 + 3.0 / 16.0, 2), 1e-14);
}

TEST(Loss, GradientMatchesFiniteDifferences) {
  AdjointStrongForm p = mean_value_problem();
  p.reaction = ScalarField::function([](Point x) { return 1.0 + x.x; });
  const auto pts = CollocationSet::uniform_random(20, 4);
  const BoundaryAnsatz a{Mlp::init({2, 5, 5, 1}, 8)};
  const ResidualLoss L(a, p, pts);
  Mlp net = a.net;
  Eigen::VectorXd g;
  L.value_and_gradient(net, g);
  const Eigen::VectorXd p0 = net.params();
  for (Eigen::Index i = 0; i < net.n_params(); ++i) {
    Eigen::VectorXd q = p0;
    q[i] += 1e-6;
    net.set_params(q);
    const double lp = L.value(net);
    q[i] -= 2e-6;
    net.set_params(q);
    const double lm = L.value(net);
    EXPECT_NEAR(g[i], (lp - lm) / 2e-6, 1e-6 * std::max(1.0, std::abs(g[i])));
  }
}

TEST(Collocation, UniformPointsAreInteriorAndSeeded) {
  const auto a = CollocationSet::uniform_random(1000, 5);
  const auto b = CollocationSet::uniform_random(1000, 5);
  ASSERT_EQ(a.size(), 1000u);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a.points[i], b.points[i]);
    EXPECT_GT(a.points[i].x, 0.0);
    EXPECT_LT(a.points[i].x, 1.0);
  }
}

TEST(Collocation, DofPointsDropBoundary) {
  const auto space = FeSpace::build(std::make_shared<const Mesh>(Mesh::uniform(2)), 2);
  const auto s = CollocationSet::from_dofs(*space);
  EXPECT_EQ(s.size(), 9u);
  for (Point p : s.points) EXPECT_FALSE(on_unit_square_boundary(p));
}

TEST(Optim, LbfgsSolvesRosenbrock) {
  Eigen::VectorXd x(2), g;
  x << -1.2, 1.0;
  double f = rosenbrock(x, g);
  Lbfgs opt;
  for (int i = 0; i < 200 && g.norm() > 1e-10; ++i) ASSERT_TRUE(opt.step(rosenbrock, x, f, g).success);
  EXPECT_NEAR(x[0], 1.0, 1e-6);
  EXPECT_NEAR(x[1], 1.0, 1e-6);
}

TEST(Optim, StrongWolfeConditionsHold) {
  Eigen::VectorXd x(2), g;
  x << -1.2, 1.0;
  double f = rosenbrock(x, g);
  const Eigen::VectorXd d = -g, g0 = g;
  const double f0 = f;
  const LineSearchOptions o;
  const auto r = strong_wolfe(rosenbrock, x, f, g, d, 1e-3, o);
  ASSERT_TRUE(r.wolfe);
  EXPECT_LE(f, f0 + o.c1 * r.step * g0.dot(d));
  EXPECT_LE(std::abs(g.dot(d)), -o.c2 * g0.dot(d));
}

TEST(Optim, AdamDescendsQuadratic) {
  Eigen::VectorXd x = Eigen::VectorXd::Constant(3, 1.0);
  Adam adam(0.1);
  for (int i = 0; i < 500; ++i) adam.step(x, 2.0 * x);
  EXPECT_LT(x.norm(), 1e-2);
}

TEST(Train, ZeroProblemDrivesLossBelowTolerance) {
  // The default patience rule halts near 1e-7 here; a tight tolerance lets the full budget run.
  TrainConfig cfg;
  cfg.seed = 1;
  cfg.stop_tol = 1e-14;
  cfg.max_epochs = 1500;
  const BoundaryAnsatz a{Mlp::init({2, 8, 1}, 1)};
  const auto res = train(a, AdjointStrongForm{}, CollocationSet::uniform_random(200, 1), cfg);
  EXPECT_LT(res.best_loss, 1e-10);
  EXPECT_EQ(res.restarts, 0);
}

TEST(Train, BestLossIsMonotoneAndRunsAreDeterministic) {
  TrainConfig cfg;
  cfg.max_epochs = 60;
  cfg.seed = 7;
  const BoundaryAnsatz a{Mlp::init({2, 8, 8, 1}, 7)};
  const auto pts = CollocationSet::uniform_random(100, 7);
  const auto r1 = train(a, mean_value_problem(), pts, cfg);
  const auto r2 = train(a, mean_value_problem(), pts, cfg);
  ASSERT_EQ(r1.history.size(), r2.history.size());
  for (std::size_t i = 0; i < r1.history.size(); ++i) {
    EXPECT_EQ(r1.history[i].loss, r2.history[i].loss);
    if (i > 0) { EXPECT_LE(r1.history[i].best_loss, r1.history[i - 1].best_loss); }
  }
  EXPECT_EQ(r1.ansatz.net.params(), r2.ansatz.net.params());
  EXPECT_LT(r1.best_loss, 0.1 * r1.initial_loss);
  EXPECT_EQ(ResidualLoss(a, mean_value_problem(), pts).value(r1.ansatz.net), r1.best_loss);
}

TEST(Train, NanInjectionTriggersRestart) {
  TrainConfig cfg;
  cfg.max_epochs = 30;
  cfg.seed = 3;
  cfg.fault_injection = [](int epoch, Eigen::VectorXd& x) {
    if (epoch != 5) return false;
    x[0] = std::numeric_limits<double>::quiet_NaN();
    return true;
  };
  const BoundaryAnsatz a{Mlp::init({2, 8, 1}, 3)};
  const auto res = train(a, mean_value_problem(), CollocationSet::uniform_random(50, 3), cfg);
  EXPECT_EQ(res.restarts, 1);
  ASSERT_GE(res.history.size(), 6u);
  EXPECT_TRUE(std::isnan(res.history[4].loss));
  EXPECT_EQ(res.history[5].phase, TrainPhase::Restart);
  EXPECT_TRUE(res.ansatz.net.all_finite());
}

TEST(Train, LossBlowUpTriggersRestart) {
  TrainConfig cfg;
  cfg.max_epochs = 20;
  cfg.fault_injection = [](int epoch, Eigen::VectorXd& x) {
    if (epoch != 3) return false;
    x *= 50.0;
    return true;
  };
  const BoundaryAnsatz a{Mlp::init({2, 8, 1}, 4)};
  const auto res = train(a, mean_value_problem(), CollocationSet::uniform_random(50, 4), cfg);
  EXPECT_EQ(res.restarts, 1);
}

TEST(Train, PersistentDivergenceExhaustsRestarts) {
  TrainConfig cfg;
  cfg.restart_limit = 2;
  cfg.fault_injection = [](int, Eigen::VectorXd& x) {
    x[0] = std::numeric_limits<double>::infinity();
    return true;
  };
  const BoundaryAnsatz a{Mlp::init({2, 8, 1}, 5)};
  EXPECT_THROW(train(a, mean_value_problem(), CollocationSet::uniform_random(50, 5), cfg), RestartLimitExceeded);
}

TEST(Train, StallWithLargeGradientRunsAdamBurst) {
  TrainConfig cfg;
  cfg.max_epochs = 12;
  cfg.patience = 2;
  cfg.stop_tol = 1e10;  // every window counts as stalled
  cfg.saddle_grad_tol = 0.0;
  const BoundaryAnsatz a{Mlp::init({2, 8, 1}, 6)};
  const auto res = train(a, mean_value_problem(), CollocationSet::uniform_random(50, 6), cfg);
  EXPECT_GE(res.adam_bursts, 1);
  EXPECT_TRUE(std::any_of(res.history.begin(), res.history.end(),
                          [](const EpochRecord& r) { return r.phase == TrainPhase::Adam; }));
}

TEST(Train, StallWithSmallGradientStops) {
  TrainConfig cfg;
  cfg.patience = 2;
  cfg.stop_tol = 1e10;
  cfg.saddle_grad_tol = 1e100;
  const BoundaryAnsatz a{Mlp::init({2, 8, 1}, 6)};
  const auto res = train(a, mean_value_problem(), CollocationSet::uniform_random(50, 6), cfg);
  EXPECT_EQ(res.reason, StopReason::Patience);
  EXPECT_EQ(res.history.size(), 2u);
}

TEST(Train, RejectsInvalidConfig) {
  TrainConfig cfg;
  cfg.patience = 0;
  EXPECT_THROW(train(unit_ansatz(), mean_value_problem(), CollocationSet::uniform_random(5, 1), cfg),
               InvalidArgument);
}
