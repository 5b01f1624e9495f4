#pragma once

// Projected BFGS for smooth minimization over a box lo <= x <= hi.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>

namespace aopt::optim {

struct BoxQnOptions {
  /// Stop when the projected gradient satisfies |pg|_inf <= grad_tol * max(1, |f|).
  double grad_tol = 1e-8;
  int max_iter = 500;
  int max_backtracks = 60;
};

struct BoxQnResult {
  Eigen::VectorXd x;
  double f = 0.0;
  int iterations = 0;
  bool converged = false;
};

namespace detail {

inline Eigen::VectorXd project(const Eigen::VectorXd& x, const Eigen::VectorXd& lo, const Eigen::VectorXd& hi) {
  return x.cwiseMax(lo).cwiseMin(hi);
}

inline bool at_active_bound(double x, double g, double lo, double hi) {
  return (x <= lo && g > 0.0) || (x >= hi && g < 0.0);
}

}  // namespace detail

/// Minimizes `fg(x, grad)` (returns f, writes grad) over the box [lo, hi].
template <class ObjGrad>
BoxQnResult minimize_box(ObjGrad&& fg, const Eigen::VectorXd& x0, const Eigen::VectorXd& lo,
                         const Eigen::VectorXd& hi, const BoxQnOptions& opt = {}) {
  using Eigen::VectorXd;
  const auto n = x0.size();
  BoxQnResult res;
  VectorXd x = detail::project(x0, lo, hi);
  VectorXd g(n);
  double f = fg(x, g);
  Eigen::MatrixXd H = Eigen::MatrixXd::Identity(n, n);
  bool fresh_h = true;
  const double diam = (hi - lo).norm();

  for (int it = 0; it < opt.max_iter; ++it) {
    res.iterations = it;
    VectorXd pg = g;
    Eigen::Array<bool, Eigen::Dynamic, 1> active(n);
    for (Eigen::Index k = 0; k < n; ++k) {
      active[k] = detail::at_active_bound(x[k], g[k], lo[k], hi[k]);
      if (active[k]) pg[k] = 0.0;
    }
    if (pg.lpNorm<Eigen::Infinity>() <= opt.grad_tol * std::max(1.0, std::abs(f))) {
      res.converged = true;
      break;
    }

    VectorXd d = -(H * pg);
    for (Eigen::Index k = 0; k < n; ++k)
      if (active[k]) d[k] = 0.0;
    if (d.dot(pg) >= 0.0) {
      H.setIdentity();
      fresh_h = true;
      d = -pg;
    }
    double t = 1.0;
    if (fresh_h && d.norm() > 0.0) t = std::min(1.0, 0.5 * diam / d.norm());

    bool accepted = false;
    VectorXd x_new, g_new(n);
    double f_new = f;
    for (int bt = 0; bt < opt.max_backtracks; ++bt, t *= 0.5) {
      x_new = detail::project(x + t * d, lo, hi);
      const VectorXd step = x_new - x;
      if (step.lpNorm<Eigen::Infinity>() == 0.0) break;
      f_new = fg(x_new, g_new);
      if (std::isfinite(f_new) && f_new <= f + 1e-4 * g.dot(step)) {
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      if (fresh_h) {
        // No descent along the steepest projected direction: stationary to
        // working precision.
        res.converged = true;
        break;
      }
      H.setIdentity();
      fresh_h = true;
      continue;
    }

    const VectorXd s = x_new - x;
    const VectorXd y = g_new - g;
    const double sy = s.dot(y);
    if (sy > 1e-12 * s.norm() * y.norm()) {
      const double rho = 1.0 / sy;
      const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(n, n);
      if (fresh_h) H *= sy / y.squaredNorm();
      H = (I - rho * s * y.transpose()) * H * (I - rho * y * s.transpose()) + rho * s * s.transpose();
      fresh_h = false;
    }
    const double df = f - f_new;
    x = x_new;
    f = f_new;
    g = g_new;
    if (df <= 1e-15 * std::max(1.0, std::abs(f)) && s.norm() <= 1e-12 * std::max(1.0, x.norm())) {
      res.converged = true;
      break;
    }
  }
  res.x = x;
  res.f = f;
  return res;
}

}  // namespace aopt::optim
