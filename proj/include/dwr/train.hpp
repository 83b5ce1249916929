#pragma once

// Training loop for the adjoint ansatz: full-batch L-BFGS epochs, Adam
// bursts at saddle points or failed line searches, and re-initialization
// when the loss explodes.

#include <cstdio>
#include <fstream>
#include <functional>
#include <string>
#include <vector>

#include "dwr/loss.hpp"
#include "dwr/optim.hpp"

namespace dwr {

struct CollocationSpec {
  CollocationKind kind = CollocationKind::DofCoords;
  std::size_t n = 1000;  // UniformRandom only
};

struct TrainConfig {
  int max_epochs = 400;
  double stop_tol = 1e-8;
  int patience = 5;
  CollocationSpec collocation;
  std::uint64_t seed = 0;
  int lbfgs_history = 10;
  double adam_lr = 1e-3;
  int adam_steps = 50;
  int restart_limit = 5;
  double explosion_factor = 10.0;
  double saddle_grad_tol = 1e-4;

  /// Called after every epoch with the current parameters; returning true
  /// means the parameters were modified and the loss must be re-evaluated.
  std::function<bool(int epoch, Eigen::VectorXd& params)> fault_injection;

  void validate() const {
    detail::require(max_epochs > 0 && patience >= 1 && lbfgs_history > 0 && adam_steps > 0 && restart_limit > 0,
                    "TrainConfig: integer settings must be positive");
    detail::require(stop_tol > 0.0 && adam_lr > 0.0 && explosion_factor > 1.0,
                    "TrainConfig: tolerances must be positive");
    detail::require(collocation.kind == CollocationKind::DofCoords || collocation.n > 0,
                    "TrainConfig: collocation size must be positive");
  }
};

inline CollocationSet make_collocation(const CollocationSpec& spec, const FeSpace& space2, std::uint64_t seed) {
  if (spec.kind == CollocationKind::DofCoords) return CollocationSet::from_dofs(space2);
  return CollocationSet::uniform_random(spec.n, seed);
}

enum class TrainPhase { Lbfgs, Adam, Restart };

inline const char* to_string(TrainPhase p) {
  switch (p) {
    case TrainPhase::Lbfgs: return "lbfgs";
    case TrainPhase::Adam: return "adam";
    case TrainPhase::Restart: return "restart";
  }
  return "?";
}

struct EpochRecord {
  int epoch;
  double loss;
  double best_loss;
  TrainPhase phase;
};

enum class StopReason { Patience, MaxEpochs, ExactZero };

struct TrainResult {
  BoundaryAnsatz ansatz;  // parameters with the lowest loss observed
  double initial_loss = 0.0;
  double best_loss = 0.0;
  std::vector<EpochRecord> history;
  int restarts = 0;
  int adam_bursts = 0;
  int line_search_failures = 0;
  StopReason reason = StopReason::MaxEpochs;
};

inline std::uint64_t restart_seed(std::uint64_t seed, int restart) {
  return detail::splitmix64(seed ^ (0xA5A5'0000ull + static_cast<std::uint64_t>(restart)));
}

inline TrainResult train(const BoundaryAnsatz& a, const AdjointStrongForm& p, const CollocationSet& pts,
                         const TrainConfig& cfg) {
  cfg.validate();
  const ResidualLoss loss(a, p, pts);
  Mlp net = a.net;
  const Objective fn = [&](const Eigen::VectorXd& x, Eigen::VectorXd& g) {
    net.set_params(x);
    return loss.value_and_gradient(net, g);
  };

  TrainResult res;
  res.ansatz = a;
  Eigen::VectorXd x = a.net.params(), g;
  double f = fn(x, g);
  res.initial_loss = f;
  res.best_loss = std::isfinite(f) ? f : std::numeric_limits<double>::infinity();
  Eigen::VectorXd best_x = x;

  Lbfgs lbfgs(cfg.lbfgs_history);
  double attempt_best = res.best_loss;
  std::vector<double> window{f};
  enum class Pending { None, Adam, Restart };
  Pending pending = std::isfinite(f) ? Pending::None : Pending::Restart;
  if (f == 0.0) {
    res.reason = StopReason::ExactZero;
    return res;
  }

  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    TrainPhase phase = TrainPhase::Lbfgs;
    bool line_search_ok = true;
    if (pending == Pending::Restart) {
      phase = TrainPhase::Restart;
      if (++res.restarts > cfg.restart_limit) {
        throw RestartLimitExceeded("train: loss diverged after " + std::to_string(cfg.restart_limit) + " restarts");
      }
      x = Mlp::init(a.net.layer_sizes(), restart_seed(cfg.seed, res.restarts)).params();
      f = fn(x, g);
    } else if (pending == Pending::Adam) {
      phase = TrainPhase::Adam;
      ++res.adam_bursts;
      Adam adam(cfg.adam_lr);
      for (int s = 0; s < cfg.adam_steps; ++s) {
        adam.step(x, g);
        f = fn(x, g);
        if (!std::isfinite(f)) break;
      }
    } else {
      line_search_ok = lbfgs.step(fn, x, f, g).success;
      if (!line_search_ok) ++res.line_search_failures;
    }
    pending = Pending::None;

    if (cfg.fault_injection && cfg.fault_injection(epoch, x)) f = fn(x, g);

    if (std::isfinite(f) && f < res.best_loss) {
      res.best_loss = f;
      best_x = x;
    }
    res.history.push_back({epoch, f, res.best_loss, phase});

    if (!std::isfinite(f) || (phase == TrainPhase::Lbfgs && f > cfg.explosion_factor * attempt_best)) {
      pending = Pending::Restart;
      continue;
    }
    if (phase != TrainPhase::Lbfgs) {
      lbfgs.reset();
      attempt_best = f;
      window.assign(1, f);
      continue;
    }
    attempt_best = std::min(attempt_best, f);
    if (f == 0.0) {
      res.reason = StopReason::ExactZero;
      break;
    }
    if (!line_search_ok) {
      pending = Pending::Adam;
      continue;
    }
    window.push_back(f);
    const auto n = static_cast<std::size_t>(cfg.patience);
    if (window.size() > n && window[window.size() - 1 - n] - f < cfg.stop_tol) {
      if (g.norm() > cfg.saddle_grad_tol) {
        pending = Pending::Adam;
      } else {
        res.reason = StopReason::Patience;
        break;
      }
    }
  }
  Mlp out = a.net;
  out.set_params(best_x);
  res.ansatz.net = std::move(out);
  return res;
}

/// epoch,loss,phase
inline void write_loss_history(const std::string& path, const std::vector<EpochRecord>& history) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path);
  out << "epoch,loss,phase\n";
  char buf[64];
  for (const auto& r : history) {
    std::snprintf(buf, sizeof buf, "%.6e", r.loss);
    out << r.epoch << ',' << buf << ',' << to_string(r.phase) << '\n';
  }
  if (!out) throw std::runtime_error("write failed for " + path);
}

}  // namespace dwr
