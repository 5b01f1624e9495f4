#pragma once

// A-optimal designs over box x finite-grid design spaces: the sensitivity
// function phi(x, xi) = nu(beta^T q(x)) q(x)^T F^{-2} q(x), its gradient in the
// continuous coordinates, new-point search, the analytic step length toward a
// new point, merging, and the outer loop stopped by the equivalence condition
// max_x phi(x, xi) <= tr(F^{-1}).

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "aopt/box_qn.hpp"
#include "aopt/design.hpp"
#include "aopt/errors.hpp"
#include "aopt/glm.hpp"
#include "aopt/liftone.hpp"
#include "aopt/parallel.hpp"

namespace aopt {

struct ForlionConfig {
  /// Merge threshold.
  double delta = 0.1;
  /// Lift-one convergence threshold.
  double epsilon = 1e-6;
  /// Uniform random starts per discrete combination, on top of the box corners.
  int multistart = 5;
  double inner_tol = 1e-8;
  int max_outer = 500;
  std::uint64_t seed = 20240601;
  /// Relative slack on the stopping inequality phi* <= tr(F^{-1}).
  double certify_slack = 1e-6;
  int max_init_attempts = 1000;
  int threads = 1;
  /// Move the continuous coordinates of the support points to minimize
  /// tr(F^{-1}) at fixed weights after each lift-one step.
  bool refine_support = true;

  void validate() const {
    if (!(delta > 0.0)) throw InvalidArgument("delta must be positive");
    if (!(epsilon > 0.0)) throw InvalidArgument("epsilon must be positive");
    if (multistart < 1) throw InvalidArgument("multistart must be positive");
    if (!(inner_tol > 0.0)) throw InvalidArgument("inner_tol must be positive");
    if (max_outer < 1) throw InvalidArgument("max_outer must be positive");
    if (threads < 1) throw InvalidArgument("threads must be positive");
  }
};

/// Coefficients of the step toward a new point and the chosen alpha.
struct StepCoefficients {
  double a_t = 0.0;
  double b_t = 0.0;
  double A_t = 0.0;
  double B_t = 0.0;
  double alpha = 0.0;
};

// ---------------------------------------------------------------------------
// Sensitivity function
// ---------------------------------------------------------------------------

/// phi(., xi) and its gradient for a fixed design, with F^{-2} = O L^{-2} O^T
/// and tr(F^{-1}) = sum 1/lambda precomputed from the eigen decomposition.
class Sensitivity {
public:
  Sensitivity(const GlmModel& model, const ApproximateDesign& design)
      : Sensitivity(model, design.points, design.weights) {}

  Sensitivity(const GlmModel& model, const std::vector<Point>& points, const Vector& weights)
      : model_(&model) {
    const Matrix X = build_model_matrix(model, points);
    const auto info = decompose(X, nu_values(model, X), weights);
    if (info.singular()) throw SingularError("sensitivity requires a nonsingular information matrix");
    trace_inverse_ = info.trace_inverse;
    const Vector inv2 = info.eigenvalues.cwiseInverse().cwiseAbs2();
    inverse_sq_ = info.eigenvectors * inv2.asDiagonal() * info.eigenvectors.transpose();
  }

  double trace_inverse() const { return trace_inverse_; }
  const Matrix& inverse_squared() const { return inverse_sq_; }

  double operator()(const Point& x) const {
    const Vector q = model_->predictor.evaluate(x);
    const double v = nu(*model_, model_->beta.dot(q));
    if (v == 0.0) return 0.0;
    return v * q.dot(inverse_sq_ * q);
  }

  /// Gradient with respect to the listed (continuous) coordinates.
  Vector gradient(const Point& x, std::span<const int> coords) const {
    if (!model_->predictor.differentiable_in(coords))
      throw NonDifferentiableError("basis is not differentiable in the continuous factors");
    const Vector q = model_->predictor.evaluate(x);
    const Matrix J = model_->predictor.jacobian(x, coords);
    const double eta = model_->beta.dot(q);
    const Vector Aq = inverse_sq_ * q;
    return nu_prime(*model_, eta) * q.dot(Aq) * (J.transpose() * model_->beta) +
           2.0 * nu(*model_, eta) * (J.transpose() * Aq);
  }

private:
  const GlmModel* model_;
  double trace_inverse_ = 0.0;
  Matrix inverse_sq_;
};

inline double sensitivity(const GlmModel& model, const ApproximateDesign& design, const Point& x) {
  return Sensitivity(model, design)(x);
}

inline Vector sensitivity_gradient(const GlmModel& model, const ApproximateDesign& design, const Point& x,
                                   const DesignSpace& space) {
  return Sensitivity(model, design).gradient(x, space.continuous_indices());
}

// ---------------------------------------------------------------------------
// New-point search
// ---------------------------------------------------------------------------

struct PointSearchResult {
  Point x_star;
  double phi_star = -std::numeric_limits<double>::infinity();
};

namespace detail {

inline bool lex_less(const Point& a, const Point& b) {
  return std::lexicographical_compare(a.data(), a.data() + a.size(), b.data(), b.data() + b.size());
}

/// Max by phi, ties broken by the lexicographically smallest point.
inline bool better_candidate(const PointSearchResult& a, const PointSearchResult& b) {
  if (a.phi_star != b.phi_star) return a.phi_star > b.phi_star;
  return lex_less(a.x_star, b.x_star);
}

inline std::vector<Vector> box_corners(const DesignSpace& space, std::size_t cap) {
  const auto& idx = space.continuous_indices();
  const std::size_t s = idx.size();
  std::vector<Vector> out;
  const std::size_t total = s >= 63 ? cap : std::min<std::size_t>(cap, std::size_t{1} << s);
  for (std::size_t mask = 0; mask < total; ++mask) {
    Vector c(static_cast<Eigen::Index>(s));
    for (std::size_t k = 0; k < s; ++k) {
      const auto& f = space.continuous(idx[k]);
      c[static_cast<Eigen::Index>(k)] = (mask >> k) & 1U ? f.upper : f.lower;
    }
    out.push_back(std::move(c));
  }
  return out;
}

}  // namespace detail

/// Maximizes phi over the continuous box for every discrete combination, from
/// all box corners (at most 64) plus `multistart` uniform starting points.
inline PointSearchResult new_point_search(const GlmModel& model, const ApproximateDesign& design,
                                          const DesignSpace& space, const ForlionConfig& config,
                                          std::uint64_t stream = 0) {
  if (space.num_continuous() == 0)
    throw InvalidArgument("new-point search needs a continuous factor; use lift-one on the finite set");
  const Sensitivity phi(model, design);
  const auto& cidx = space.continuous_indices();
  const auto s = static_cast<Eigen::Index>(cidx.size());
  Vector lo(s), hi(s);
  for (Eigen::Index k = 0; k < s; ++k) {
    lo[k] = space.continuous(cidx[k]).lower;
    hi[k] = space.continuous(cidx[k]).upper;
  }

  const auto combos = space.discrete_combinations();
  std::vector<Vector> starts = detail::box_corners(space, 64);
  std::mt19937_64 rng(config.seed ^ (0x9e3779b97f4a7c15ULL * (stream + 1)));
  for (int r = 0; r < config.multistart; ++r) {
    Vector u(s);
    for (Eigen::Index k = 0; k < s; ++k) u[k] = std::uniform_real_distribution<double>(lo[k], hi[k])(rng);
    starts.push_back(std::move(u));
  }

  const std::size_t tasks = combos.size() * starts.size();
  std::vector<PointSearchResult> found(tasks);
  optim::BoxQnOptions qn;
  qn.grad_tol = config.inner_tol;
  detail::run_parallel(tasks, config.threads, [&](std::size_t t) {
    const auto& combo = combos[t / starts.size()];
    const auto& x0 = starts[t % starts.size()];
    auto objective = [&](const Vector& xc, Vector& grad) {
      const Point x = space.compose(xc, combo);
      grad = -phi.gradient(x, cidx);
      return -phi(x);
    };
    const auto r = optim::minimize_box(objective, x0, lo, hi, qn);
    found[t] = {space.compose(r.x, combo), -r.f};
  });

  PointSearchResult best;
  for (const auto& f : found)
    if (best.x_star.size() == 0 || detail::better_candidate(f, best)) best = f;
  return best;
}

// ---------------------------------------------------------------------------
// Step toward a new point
// ---------------------------------------------------------------------------

/// alpha maximizing h((1 - alpha) xi_t + alpha delta_{x*}) via a_t, b_t, A_t, B_t
/// read off the half-weight augmented design.
inline StepCoefficients alpha_step(const GlmModel& model, const ApproximateDesign& design, const Point& x_star) {
  const int p = model.num_params();
  const int m = design.size();
  std::vector<Point> pts = design.points;
  pts.push_back(x_star);
  const InfoSystem sys(model, pts);
  Vector w(m + 1);
  w.head(m) = design.weights;
  w[m] = 0.0;

  const Matrix F = sys.fisher(w);
  if (InfoSystem::h_of(F) <= 0.0) throw SingularError("step length requires f(xi_t) > 0");
  Vector half(m + 1);
  half.head(m) = design.weights / 2.0;
  half[m] = 0.5;
  const Matrix Fh = sys.fisher(half);

  LiftOneCoefficients c;
  c.index = m;
  c.b = detail::det_psd(F);
  c.a = detail::clamp_nonneg(detail::det_psd(Fh) * std::pow(2.0, p) - c.b);
  c.b_j = InfoSystem::minors_of(F);
  const Vector mh = InfoSystem::minors_of(Fh);
  c.a_j.resize(p);
  for (int j = 0; j < p; ++j) c.a_j[j] = detail::clamp_nonneg(mh[j] * std::pow(2.0, p - 1) - c.b_j[j]);
  c.A = c.a_j.sum();
  c.B = c.b_j.sum();

  StepCoefficients out{c.a, c.b, c.A, c.B, 0.0};
  const auto best = maximize_hi(c);
  if (best.which == LiftCase::Interior || best.which == LiftCase::EqualSlopes) out.alpha = best.x_star;
  return out;
}

// ---------------------------------------------------------------------------
// Merging
// ---------------------------------------------------------------------------

struct MergeResult {
  ApproximateDesign design;
  int merges = 0;
  bool rank_guard_fired = false;
};

namespace detail {

/// Repeatedly merges the closest eligible pair at distance < delta. `eligible`
/// filters pairs; `acceptable` vetoes a merged design (and stops merging).
template <class Eligible, class Acceptable>
MergeResult merge_closest(ApproximateDesign d, double delta, Eligible&& eligible, Acceptable&& acceptable) {
  MergeResult res;
  while (d.size() > 1) {
    int bi = -1, bj = -1;
    double best = delta;
    for (int i = 0; i < d.size(); ++i)
      for (int j = i + 1; j < d.size(); ++j) {
        if (!eligible(d.points[i], d.points[j])) continue;
        const double dist = (d.points[i] - d.points[j]).norm();
        if (dist < best) {
          best = dist;
          bi = i;
          bj = j;
        }
      }
    if (bi < 0) break;
    const double wi = d.weights[bi], wj = d.weights[bj];
    const double wsum = wi + wj;
    Point merged = wsum > 0.0 ? Point((wi * d.points[bi] + wj * d.points[bj]) / wsum) : Point(d.points[bi]);
    ApproximateDesign next;
    next.weights.resize(d.size() - 1);
    for (int k = 0, r = 0; k < d.size(); ++k) {
      if (k == bi || k == bj) continue;
      next.points.push_back(d.points[k]);
      next.weights[r++] = d.weights[k];
    }
    next.points.push_back(std::move(merged));
    next.weights[d.size() - 2] = wsum;
    if (!acceptable(next)) {
      res.rank_guard_fired = true;
      break;
    }
    d = std::move(next);
    ++res.merges;
  }
  res.design = std::move(d);
  return res;
}

}  // namespace detail

/// Merges points closer than delta into their weighted centroid (no rank guard).
inline MergeResult merge_points(const ApproximateDesign& design, double delta) {
  return detail::merge_closest(
      design, delta, [](const Point&, const Point&) { return true; }, [](const ApproximateDesign&) { return true; });
}

/// Merging with the singularity guard; only points sharing their discrete
/// coordinates are merged so the centroid stays inside the design space.
inline MergeResult merge_points(const GlmModel& model, const ApproximateDesign& design, double delta,
                                const DesignSpace& space) {
  const auto& disc = space.discrete_indices();
  auto same_discrete = [&](const Point& a, const Point& b) {
    for (int j : disc)
      if (a[j] != b[j]) return false;
    return true;
  };
  auto nonsingular = [&](const ApproximateDesign& d) { return h_value(model, d) > 0.0; };
  return detail::merge_closest(design, delta, same_discrete, nonsingular);
}

// ---------------------------------------------------------------------------
// Outer loop
// ---------------------------------------------------------------------------

struct ForlionTraceRow {
  int iter = 0;
  double h = 0.0;
  int m_t = 0;
  double phi_star = 0.0;
  double trace_inverse = 0.0;
  double alpha_t = 0.0;
};

struct ForlionResult {
  ApproximateDesign design;
  std::vector<ForlionTraceRow> trace;
  bool certified = false;
  int iterations = 0;
  double h = 0.0;
  double phi_star = 0.0;
  double trace_inverse = 0.0;
  /// Support size above p(p+1)/2 (reported, never enforced).
  bool support_bound_exceeded = false;
  bool rank_guard_fired = false;
  /// Smallest relative h change over lift-one updates and alpha steps.
  double worst_step = 0.0;
  std::string stop_reason;
};

namespace detail {

inline double min_distance_to(const std::vector<Point>& pts, const Point& x) {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& y : pts) best = std::min(best, (x - y).norm());
  return best;
}

inline Point random_point(const DesignSpace& space, const std::vector<std::vector<double>>& combos,
                          std::mt19937_64& rng, bool corners_only) {
  const auto& cidx = space.continuous_indices();
  Vector c(static_cast<Eigen::Index>(cidx.size()));
  for (std::size_t k = 0; k < cidx.size(); ++k) {
    const auto& f = space.continuous(cidx[k]);
    c[static_cast<Eigen::Index>(k)] = corners_only
                                          ? (std::bernoulli_distribution(0.5)(rng) ? f.upper : f.lower)
                                          : std::uniform_real_distribution<double>(f.lower, f.upper)(rng);
  }
  const auto& combo = combos[std::uniform_int_distribution<std::size_t>(0, combos.size() - 1)(rng)];
  return space.compose(c, combo);
}

}  // namespace detail

inline ApproximateDesign drop_zero_weights(const ApproximateDesign& d) {
  ApproximateDesign kept;
  for (int i = 0; i < d.size(); ++i)
    if (d.weights[i] > 0.0) kept.points.push_back(d.points[i]);
  kept.weights.resize(static_cast<Eigen::Index>(kept.points.size()));
  for (int i = 0, r = 0; i < d.size(); ++i)
    if (d.weights[i] > 0.0) kept.weights[r++] = d.weights[i];
  kept.weights /= kept.weights.sum();
  return kept;
}

/// Minimizes tr(F^{-1}) over the continuous coordinates of all support points
/// with the weights held fixed. d tr(F^{-1}) / d x_i = -w_i grad phi(x_i).
inline ApproximateDesign refine_support(const GlmModel& model, const ApproximateDesign& design,
                                        const DesignSpace& space, double grad_tol) {
  const auto& cidx = space.continuous_indices();
  const int s = static_cast<int>(cidx.size());
  const int m = design.size();
  if (s == 0 || m == 0) return design;
  Vector z(m * s), lo(m * s), hi(m * s);
  for (int i = 0; i < m; ++i)
    for (int k = 0; k < s; ++k) {
      z[i * s + k] = design.points[i][cidx[k]];
      lo[i * s + k] = space.continuous(cidx[k]).lower;
      hi[i * s + k] = space.continuous(cidx[k]).upper;
    }
  auto unpack = [&](const Vector& v) {
    std::vector<Point> pts = design.points;
    for (int i = 0; i < m; ++i)
      for (int k = 0; k < s; ++k) pts[i][cidx[k]] = v[i * s + k];
    return pts;
  };
  auto objective = [&](const Vector& v, Vector& grad) {
    const auto pts = unpack(v);
    grad = Vector::Zero(v.size());
    Sensitivity phi(model, pts, design.weights);
    for (int i = 0; i < m; ++i) grad.segment(i * s, s) = -design.weights[i] * phi.gradient(pts[i], cidx);
    return phi.trace_inverse();
  };
  auto guarded = [&](const Vector& v, Vector& grad) {
    try {
      return objective(v, grad);
    } catch (const SingularError&) {
      grad = Vector::Zero(v.size());
      return std::numeric_limits<double>::infinity();
    }
  };
  optim::BoxQnOptions qn;
  qn.grad_tol = grad_tol;
  const auto r = optim::minimize_box(guarded, z, lo, hi, qn);
  const double before = 1.0 / h_value(model, design);
  if (!(r.f < before)) return design;
  return {unpack(r.x), design.weights};
}

/// Initial design: box corners times discrete combinations (first 64) kept at
/// least delta apart, filled with random points until F is nonsingular.
inline ApproximateDesign forlion_initial_design(const GlmModel& model, const DesignSpace& space,
                                                const ForlionConfig& config) {
  const auto combos = space.discrete_combinations();
  std::vector<Point> pts;
  for (const auto& combo : combos) {
    for (const auto& c : detail::box_corners(space, 64)) {
      if (pts.size() >= 64) break;
      Point x = space.compose(c, combo);
      if (detail::min_distance_to(pts, x) >= config.delta) pts.push_back(std::move(x));
    }
    if (pts.size() >= 64) break;
  }
  auto nonsingular = [&](const std::vector<Point>& P) {
    return !P.empty() && h_value(model, {P, Vector::Constant(static_cast<Eigen::Index>(P.size()), 1.0 / P.size())}) > 0.0;
  };
  std::mt19937_64 rng(config.seed);
  int attempts = 0;
  while (!nonsingular(pts) && attempts < config.max_init_attempts) {
    ++attempts;
    Point x = detail::random_point(space, combos, rng, attempts % 2 == 1);
    if (detail::min_distance_to(pts, x) >= config.delta) pts.push_back(std::move(x));
  }
  if (!nonsingular(pts)) throw InfeasibleError("no nonsingular initial design found");
  return {pts, Vector::Constant(static_cast<Eigen::Index>(pts.size()), 1.0 / pts.size())};
}

inline ForlionResult forlion_optimize(const GlmModel& model, const DesignSpace& space, const ForlionConfig& config,
                                      std::function<void(const ForlionTraceRow&)> on_iteration = {}) {
  config.validate();
  model.validate();
  if (space.num_continuous() < 1) throw InvalidArgument("ForLion needs at least one continuous factor");
  model.predictor.validate(space.dimension());
  const int p = model.num_params();

  ForlionResult res;
  ApproximateDesign xi = forlion_initial_design(model, space, config);

  for (int t = 0; t < config.max_outer; ++t) {
    res.iterations = t + 1;
    auto merged = merge_points(model, xi, config.delta, space);
    res.rank_guard_fired = res.rank_guard_fired || merged.rank_guard_fired;
    xi = std::move(merged.design);

    LiftOneOptions lo;
    lo.epsilon = config.epsilon;
    lo.seed = config.seed + static_cast<std::uint64_t>(t);
    lo.initial_weights = xi.weights;
    const InfoSystem sys(model, xi.points);
    const auto lifted = liftone_optimize(sys, xi.points, lo);
    res.worst_step = std::min(res.worst_step, lifted.worst_step);
    xi = lifted.design;

    xi = drop_zero_weights(xi);
    if (config.refine_support) {
      const double h_before = h_value(model, xi);
      xi = refine_support(model, xi, space, config.inner_tol);
      res.worst_step = std::min(res.worst_step, (h_value(model, xi) - h_before) / h_before);
    }

    const double h = h_value(model, xi);
    const auto found = new_point_search(model, xi, space, config, static_cast<std::uint64_t>(t));
    const double tr = 1.0 / h;
    ForlionTraceRow row{t, h, xi.size(), found.phi_star, tr, 0.0};

    if (found.phi_star <= tr * (1.0 + config.certify_slack)) {
      res.certified = true;
      res.stop_reason = "equivalence condition met";
      res.trace.push_back(row);
      if (on_iteration) on_iteration(row);
      break;
    }
    const auto step = alpha_step(model, xi, found.x_star);
    row.alpha_t = step.alpha;
    res.trace.push_back(row);
    if (on_iteration) on_iteration(row);
    if (step.alpha <= 0.0) {
      res.stop_reason = "no ascent along the best new point";
      break;
    }

    ApproximateDesign next;
    next.points = xi.points;
    next.points.push_back(found.x_star);
    next.weights.resize(xi.size() + 1);
    next.weights.head(xi.size()) = xi.weights * (1.0 - step.alpha);
    next.weights[xi.size()] = step.alpha;
    const double h_next = h_value(model, next);
    res.worst_step = std::min(res.worst_step, (h_next - h) / h);
    xi = std::move(next);
  }
  if (res.stop_reason.empty()) throw NonConvergence("ForLion reached max_outer iterations");

  res.design = xi;
  res.h = h_value(model, xi);
  res.trace_inverse = 1.0 / res.h;
  res.phi_star = res.trace.back().phi_star;
  res.support_bound_exceeded = xi.size() > p * (p + 1) / 2;
  return res;
}

// ---------------------------------------------------------------------------
// Equivalence-condition check
// ---------------------------------------------------------------------------

struct Certificate {
  double max_phi = 0.0;
  Point argmax;
  double trace_inverse = 0.0;
  /// max_phi / tr(F^{-1}) - 1.
  double slack = 0.0;
  bool certified = false;
  long evaluations = 0;
};

namespace detail {

inline Certificate finish_certificate(Certificate c, double tol) {
  c.slack = c.max_phi / c.trace_inverse - 1.0;
  c.certified = c.slack <= tol;
  return c;
}

}  // namespace detail

/// max phi over a finite candidate set against tr(F^{-1}).
inline Certificate certify(const GlmModel& model, const ApproximateDesign& design, const std::vector<Point>& candidates,
                           double tol = 1e-6) {
  const Sensitivity phi(model, design);
  Certificate c;
  c.trace_inverse = phi.trace_inverse();
  c.max_phi = -std::numeric_limits<double>::infinity();
  for (const auto& x : candidates) {
    const double v = phi(x);
    ++c.evaluations;
    if (v > c.max_phi) {
      c.max_phi = v;
      c.argmax = x;
    }
  }
  return detail::finish_certificate(std::move(c), tol);
}

/// max phi over a grid with `grid` points per continuous factor, times every
/// discrete combination, followed by a quasi-Newton polish from the best
/// `polish_starts` grid points of each combination.
inline Certificate certify(const GlmModel& model, const ApproximateDesign& design, const DesignSpace& space, int grid,
                           double tol = 1e-6, int polish_starts = 3) {
  if (grid < 2) throw InvalidArgument("grid needs at least two points per factor");
  const Sensitivity phi(model, design);
  const auto& cidx = space.continuous_indices();
  const auto s = static_cast<Eigen::Index>(cidx.size());
  Vector lo(s), hi(s);
  for (Eigen::Index k = 0; k < s; ++k) {
    lo[k] = space.continuous(cidx[k]).lower;
    hi[k] = space.continuous(cidx[k]).upper;
  }
  Certificate c;
  c.trace_inverse = phi.trace_inverse();
  c.max_phi = -std::numeric_limits<double>::infinity();
  auto consider = [&](const Point& x, double v) {
    if (v > c.max_phi) {
      c.max_phi = v;
      c.argmax = x;
    }
  };
  long cells = 1;
  for (Eigen::Index k = 0; k < s; ++k) cells *= grid;
  for (const auto& combo : space.discrete_combinations()) {
    std::vector<std::pair<double, Vector>> best;
    for (long cell = 0; cell < cells; ++cell) {
      Vector xc(s);
      long r = cell;
      for (Eigen::Index k = 0; k < s; ++k) {
        const long i = r % grid;
        r /= grid;
        xc[k] = lo[k] + (hi[k] - lo[k]) * static_cast<double>(i) / static_cast<double>(grid - 1);
      }
      const Point x = space.compose(xc, combo);
      const double v = phi(x);
      ++c.evaluations;
      consider(x, v);
      best.emplace_back(v, xc);
      if (static_cast<int>(best.size()) > polish_starts) {
        std::sort(best.begin(), best.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
        best.pop_back();
      }
    }
    if (s == 0) continue;
    for (const auto& [v0, x0] : best) {
      auto objective = [&](const Vector& xc, Vector& grad) {
        const Point x = space.compose(xc, combo);
        grad = -phi.gradient(x, cidx);
        return -phi(x);
      };
      const auto r = optim::minimize_box(objective, x0, lo, hi);
      const Point x = space.compose(r.x, combo);
      consider(x, phi(x));
    }
  }
  return detail::finish_certificate(std::move(c), tol);
}

}  // namespace aopt
