#pragma once

// Full-batch optimizers over a flat parameter vector: L-BFGS with a
// strong-Wolfe line search, and Adam.

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <deque>
#include <functional>
#include <limits>
#include <vector>

namespace dwr {

/// f(x, grad) returns the objective and writes its gradient.
using Objective = std::function<double(const Eigen::VectorXd&, Eigen::VectorXd&)>;

struct LineSearchOptions {
  double c1 = 1e-4;
  double c2 = 0.9;
  int max_evaluations = 25;
};

namespace detail {

// Minimizer of the cubic through (a, fa, ga), (b, fb, gb), clamped to [lo, hi].
inline double cubic_minimizer(double a, double fa, double ga, double b, double fb, double gb, double lo,
                              double hi) {
  const double d1 = ga + gb - 3.0 * (fa - fb) / (a - b);
  const double d2sq = d1 * d1 - ga * gb;
  if (d2sq >= 0.0) {
    const double d2 = std::copysign(std::sqrt(d2sq), b - a);
    const double t = b - (b - a) * (gb + d2 - d1) / (gb - ga + 2.0 * d2);
    if (std::isfinite(t)) return std::clamp(t, lo, hi);
  }
  return 0.5 * (lo + hi);
}

}  // namespace detail

struct LineSearchResult {
  bool success = false;  // sufficient decrease achieved
  bool wolfe = false;    // curvature condition achieved as well
  double step = 0.0;
  double f = 0.0;
  int evaluations = 0;
};

/// Strong-Wolfe search along d from x (value f0, gradient g0). On success x,
/// f0 and g0 are replaced by the accepted point.
inline LineSearchResult strong_wolfe(const Objective& fn, Eigen::VectorXd& x, double& f0, Eigen::VectorXd& g0,
                                     const Eigen::VectorXd& d, double step0, const LineSearchOptions& o) {
  const double dphi0 = g0.dot(d);
  LineSearchResult res;
  if (!(dphi0 < 0.0)) return res;

  Eigen::VectorXd xt, gt;
  Eigen::VectorXd best_x, best_g;
  double best_f = f0, best_step = 0.0;
  auto eval = [&](double a, double& f, double& dphi) {
    xt = x + a * d;
    f = fn(xt, gt);
    dphi = gt.dot(d);
    ++res.evaluations;
    if (std::isfinite(f) && f <= f0 + o.c1 * a * dphi0 && f < best_f) {
      best_f = f;
      best_step = a;
      best_x = xt;
      best_g = gt;
    }
  };
  auto accept = [&](bool wolfe) {
    if (best_step == 0.0) return res;
    x = best_x;
    g0 = best_g;
    f0 = best_f;
    res.success = true;
    res.wolfe = wolfe;
    res.step = best_step;
    res.f = best_f;
    return res;
  };
  auto accept_current = [&](double a, double f) {
    x = xt;
    g0 = gt;
    f0 = f;
    res.success = res.wolfe = true;
    res.step = a;
    res.f = f;
    return res;
  };

  double a_prev = 0.0, f_prev = f0, g_prev = dphi0;
  double a = step0;
  double lo = 0, flo = 0, glo = 0, hi = 0, fhi = 0, ghi = 0;
  bool bracketed = false;
  while (res.evaluations < o.max_evaluations) {
    double f, g;
    eval(a, f, g);
    if (!std::isfinite(f) || f > f0 + o.c1 * a * dphi0 || (res.evaluations > 1 && f >= f_prev)) {
      lo = a_prev, flo = f_prev, glo = g_prev;
      hi = a, fhi = f, ghi = g;
      bracketed = true;
      break;
    }
    if (std::abs(g) <= -o.c2 * dphi0) return accept_current(a, f);
    if (g >= 0.0) {
      lo = a, flo = f, glo = g;
      hi = a_prev, fhi = f_prev, ghi = g_prev;
      bracketed = true;
      break;
    }
    const double a_next = detail::cubic_minimizer(a_prev, f_prev, g_prev, a, f, g, a + 0.01 * (a - a_prev), 10.0 * a);
    a_prev = a, f_prev = f, g_prev = g;
    a = a_next;
  }
  if (!bracketed) return accept(false);

  // Zoom: lo always satisfies sufficient decrease and has the lowest value seen.
  while (res.evaluations < o.max_evaluations) {
    const double width = std::abs(hi - lo);
    if (width * d.lpNorm<Eigen::Infinity>() < 1e-16) break;
    const double left = std::min(lo, hi), right = std::max(lo, hi);
    double t = std::isfinite(fhi)
                   ? detail::cubic_minimizer(lo, flo, glo, hi, fhi, ghi, left, right)
                   : 0.5 * (left + right);
    if (t - left < 0.1 * width || right - t < 0.1 * width) t = 0.5 * (left + right);
    double f, g;
    eval(t, f, g);
    if (!std::isfinite(f) || f > f0 + o.c1 * t * dphi0 || f >= flo) {
      hi = t, fhi = f, ghi = g;
    } else {
      if (std::abs(g) <= -o.c2 * dphi0) return accept_current(t, f);
      if (g * (hi - lo) >= 0.0) hi = lo, fhi = flo, ghi = glo;
      lo = t, flo = f, glo = g;
    }
  }
  return accept(false);
}

/// Limited-memory BFGS; one call to step() is one outer iteration.
class Lbfgs {
 public:
  explicit Lbfgs(int history = 10, LineSearchOptions ls = {}) : m_(history), ls_(ls) {}

  void reset() {
    s_.clear();
    y_.clear();
  }

  /// Advances x (value f, gradient g) by one quasi-Newton step.
  LineSearchResult step(const Objective& fn, Eigen::VectorXd& x, double& f, Eigen::VectorXd& g) {
    Eigen::VectorXd d = direction(g);
    if (!(g.dot(d) < 0.0)) {
      reset();
      d = -g;
    }
    const double step0 = s_.empty() ? std::min(1.0, 1.0 / std::max(g.lpNorm<1>(), 1e-300)) : 1.0;
    const Eigen::VectorXd x_old = x, g_old = g;
    const LineSearchResult r = strong_wolfe(fn, x, f, g, d, step0, ls_);
    if (r.success) {
      Eigen::VectorXd s = x - x_old, y = g - g_old;
      if (y.dot(s) > 1e-10 * s.squaredNorm()) {
        s_.push_back(std::move(s));
        y_.push_back(std::move(y));
        if (static_cast<int>(s_.size()) > m_) {
          s_.pop_front();
          y_.pop_front();
        }
      }
    }
    return r;
  }

 private:
  Eigen::VectorXd direction(const Eigen::VectorXd& g) const {
    Eigen::VectorXd q = -g;
    const std::size_t k = s_.size();
    std::vector<double> alpha(k), rho(k);
    for (std::size_t i = k; i-- > 0;) {
      rho[i] = 1.0 / y_[i].dot(s_[i]);
      alpha[i] = rho[i] * s_[i].dot(q);
      q -= alpha[i] * y_[i];
    }
    if (k > 0) q *= s_.back().dot(y_.back()) / y_.back().squaredNorm();
    for (std::size_t i = 0; i < k; ++i) {
      const double beta = rho[i] * y_[i].dot(q);
      q += (alpha[i] - beta) * s_[i];
    }
    return q;
  }

  int m_;
  LineSearchOptions ls_;
  std::deque<Eigen::VectorXd> s_, y_;
};

class Adam {
 public:
  explicit Adam(double lr = 1e-3, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : lr_(lr), b1_(beta1), b2_(beta2), eps_(eps) {}

  void step(Eigen::VectorXd& x, const Eigen::VectorXd& g) {
    if (m_.size() != x.size()) {
      m_ = Eigen::VectorXd::Zero(x.size());
      v_ = Eigen::VectorXd::Zero(x.size());
      t_ = 0;
    }
    ++t_;
    m_ = b1_ * m_ + (1.0 - b1_) * g;
    v_ = b2_ * v_ + (1.0 - b2_) * g.cwiseAbs2();
    const double c1 = 1.0 - std::pow(b1_, t_), c2 = 1.0 - std::pow(b2_, t_);
    x.array() -= lr_ * (m_.array() / c1) / ((v_.array() / c2).sqrt() + eps_);
  }

 private:
  double lr_, b1_, b2_, eps_;
  Eigen::VectorXd m_, v_;
  int t_ = 0;
};

}  // namespace dwr
