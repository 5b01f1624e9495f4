#pragma once

// A-optimal allocations on a finite candidate set: the saturated closed form,
// the lift-one coefficients of f_i(x) and f_i^{(-j)}(x), the exact maximizer
// of h_i(x) on [0, 1], and the coordinate-ascent loop with its certificate.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "aopt/design.hpp"
#include "aopt/errors.hpp"
#include "aopt/glm.hpp"

namespace aopt {

/// f_i(x) = a x (1-x)^{p-1} + b (1-x)^p and
/// f_i^{(-j)}(x) = a_j x (1-x)^{p-2} + b_j (1-x)^{p-1}.
struct LiftOneCoefficients {
  double a = 0.0;
  double b = 0.0;
  Vector a_j;
  Vector b_j;
  double A = 0.0;
  double B = 0.0;
  int index = 0;
  double weight = 0.0;

  /// h_i(x) = ((b-a) x^2 + (a-2b) x + b) / ((A-B) x + B).
  double h_at(double x) const {
    const double den = (A - B) * x + B;
    if (den <= 0.0) return 0.0;
    return ((b - a) * x * x + (a - 2.0 * b) * x + b) / den;
  }
};

/// Which branch of the one-dimensional maximizer fired.
enum class LiftCase { Interior = 1, EqualSlopes = 2, ZeroBase = 3, Boundary = 4 };

struct LiftMaximum {
  double x_star = 0.0;
  double h_star = 0.0;
  LiftCase which = LiftCase::Boundary;
  /// Case 3: h_i(0) is 0/0 and the value is the limit a/A.
  bool boundary_degenerate = false;
};

namespace detail {

/// Weight below which a_j/a are recovered from f_i(1/2) instead of dividing by w_i.
inline constexpr double kSmallLiftWeight = 1e-4;

/// (1-x)/(1-w_i) w_l for l != i, x at position i.
inline Vector lift(const Vector& w, int i, double x) {
  Vector v = w * ((1.0 - x) / (1.0 - w[i]));
  v[i] = x;
  return v;
}

inline double clamp_nonneg(double v) { return v < 0.0 ? 0.0 : v; }

/// Relative tie tolerance for the case predicates.
inline constexpr double kCaseTol = 1e-10;

}  // namespace detail

/// Coefficients a, b, a_j, b_j of the lifted objective along coordinate i.
inline LiftOneCoefficients liftone_coefficients(const InfoSystem& sys, const Vector& w, int i) {
  const int p = sys.num_params();
  if (i < 0 || i >= sys.num_points()) throw InvalidArgument("lift-one index out of range");
  const double wi = w[i];
  if (!(wi < 1.0)) throw WeightError("lift-one requires w_i < 1");
  if (wi < 0.0) throw WeightError("negative weight");

  const Matrix F = sys.fisher(w);
  const double fw = detail::det_psd(F);
  if (InfoSystem::h_of(F) <= 0.0) throw SingularError("lift-one requires f(w) > 0");
  const Vector minors = InfoSystem::minors_of(F);

  LiftOneCoefficients c;
  c.index = i;
  c.weight = wi;
  c.a_j.resize(p);
  c.b_j.resize(p);

  if (wi == 0.0) {
    const Matrix Fh = sys.fisher(detail::lift(w, i, 0.5));
    const Vector mh = InfoSystem::minors_of(Fh);
    c.b = fw;
    c.a = detail::det_psd(Fh) * std::pow(2.0, p) - c.b;
    for (int j = 0; j < p; ++j) {
      c.b_j[j] = minors[j];
      c.a_j[j] = mh[j] * std::pow(2.0, p - 1) - c.b_j[j];
    }
  } else {
    const Matrix F0 = sys.fisher(detail::lift(w, i, 0.0));
    const Vector m0 = InfoSystem::minors_of(F0);
    c.b = detail::det_psd(F0);
    for (int j = 0; j < p; ++j) c.b_j[j] = m0[j];
    if (wi >= detail::kSmallLiftWeight) {
      const double om = 1.0 - wi;
      c.a = (fw - c.b * std::pow(om, p)) / (wi * std::pow(om, p - 1));
      for (int j = 0; j < p; ++j)
        c.a_j[j] = (minors[j] - c.b_j[j] * std::pow(om, p - 1)) / (wi * std::pow(om, p - 2));
    } else {
      // Dividing by a tiny w_i amplifies rounding; read a from f_i(1/2) instead.
      const Matrix Fh = sys.fisher(detail::lift(w, i, 0.5));
      const Vector mh = InfoSystem::minors_of(Fh);
      c.a = detail::det_psd(Fh) * std::pow(2.0, p) - c.b;
      for (int j = 0; j < p; ++j) c.a_j[j] = mh[j] * std::pow(2.0, p - 1) - c.b_j[j];
    }
  }

  c.a = detail::clamp_nonneg(c.a);
  c.b = detail::clamp_nonneg(c.b);
  for (int j = 0; j < p; ++j) {
    c.a_j[j] = detail::clamp_nonneg(c.a_j[j]);
    c.b_j[j] = detail::clamp_nonneg(c.b_j[j]);
  }
  c.A = c.a_j.sum();
  c.B = c.b_j.sum();
  return c;
}

inline LiftOneCoefficients liftone_coefficients(const GlmModel& model, const ApproximateDesign& design, int i) {
  return liftone_coefficients(InfoSystem(model, design.points), design.weights, i);
}

/// Exact maximizer of h_i(x) over [0, 1].
inline LiftMaximum maximize_hi(const LiftOneCoefficients& c) {
  const double sA = std::max(c.A, c.B);
  if (!(sA > 0.0)) throw DegenerateError("A = B = 0: direction carries no information");
  const double sa = std::max(c.a, c.b);
  if (!(sa > 0.0)) return {0.0, 0.0, LiftCase::Boundary, false};

  // The argmax is invariant to scaling (a, b) and (A, B) separately, so the
  // predicates run on normalized values with an absolute slack.
  const double a = c.a / sa, b = c.b / sa, A = c.A / sA, B = c.B / sA;
  const double tol = detail::kCaseTol;
  const bool equal_AB = std::abs(A - B) <= tol;

  if (!equal_AB && A > tol && B > tol && a > b + tol && a * B - b * A > tol && b * A < (a - b) * B - tol) {
    // x* = (t* - B)/(A - B) with t* = sqrt(A(aB - bA)/(a - b)), rewritten
    // without the A - B cancellation.
    const double u = c.A * (c.a - c.b);
    const double v = c.a * c.B - c.b * c.A;
    const double t = std::sqrt(c.A * v / (c.a - c.b));
    const double x = std::clamp((c.a * c.B - c.b * (c.A + c.B)) / ((c.a - c.b) * (t + c.B)), 0.0, 1.0);
    const double root = std::sqrt(u) + std::sqrt(v);
    return {x, c.a * c.a / (root * root), LiftCase::Interior, false};
  }
  if (equal_AB && a > 2.0 * b + tol) {
    const double x = (c.a - 2.0 * c.b) / (2.0 * c.a - 2.0 * c.b);
    return {x, c.a * c.a / (4.0 * (c.a - c.b) * c.B), LiftCase::EqualSlopes, false};
  }
  if (!equal_AB && B <= tol && b <= tol) return {0.0, c.a / c.A, LiftCase::ZeroBase, true};
  return {0.0, c.b / c.B, LiftCase::Boundary, false};
}

// ---------------------------------------------------------------------------
// Saturated designs
// ---------------------------------------------------------------------------

/// Closed-form A-optimal weights for m = p: w_i proportional to sqrt(c_i / nu_i),
/// c_i the i-th diagonal entry of (X X^T)^{-1}.
inline Vector saturated_weights(const Matrix& X, const Vector& nu) {
  const auto p = X.cols();
  if (X.rows() != p || p < 1) throw InvalidArgument("saturated solve needs a square model matrix");
  for (Eigen::Index i = 0; i < p; ++i)
    if (!(nu[i] > 0.0)) throw DomainError("saturated solve needs nu_i > 0 at every point");
  Eigen::FullPivLU<Matrix> lu(X);
  lu.setThreshold(1e-12);
  if (lu.rank() < p) throw RankError("model matrix of the saturated design is singular");
  // diag((X X^T)^{-1}) = squared column norms of X^{-1}.
  const Matrix Xinv = lu.inverse();
  Vector w(p);
  for (Eigen::Index i = 0; i < p; ++i) w[i] = std::sqrt(Xinv.col(i).squaredNorm() / nu[i]);
  return w / w.sum();
}

inline ApproximateDesign saturated_aopt(const GlmModel& model, const std::vector<Point>& points) {
  if (static_cast<int>(points.size()) != model.num_params())
    throw InvalidArgument("saturated design needs exactly p points");
  const Matrix X = build_model_matrix(model, points);
  return {points, saturated_weights(X, nu_values(model, X))};
}

// ---------------------------------------------------------------------------
// Lift-one coordinate ascent
// ---------------------------------------------------------------------------

enum class InitKind { Uniform, RandomExponential };

struct LiftOneOptions {
  InitKind init = InitKind::Uniform;
  std::uint64_t seed = 20240601;
  /// Stop once a full sweep improves h by at most epsilon * h.
  double epsilon = 1e-10;
  int max_sweeps = 10000;
  /// Relative slack in the optimality certificate.
  double certificate_tol = 1e-8;
  /// Overrides `init` when non-empty; must lie strictly inside the simplex.
  Vector initial_weights;
};

struct LiftOneResult {
  ApproximateDesign design;
  double h = 0.0;
  int iterations = 0;
  bool certified = false;
  std::string method = "liftone";
  std::uint64_t seed = 0;
  /// Smallest (h_new - h_old)/h_old over all proposed updates (0 if none).
  double worst_step = 0.0;
  int rejected_updates = 0;
  /// Number of case-3 (boundary-degenerate) directions seen.
  int degenerate_directions = 0;
  /// h after each sweep, starting with the initial allocation.
  std::vector<double> h_trace;
};

/// Largest h_i over all coordinates relative to h(w) minus one; <= tol certifies.
inline double liftone_certificate_gap(const InfoSystem& sys, const Vector& w) {
  const double h = sys.h(w);
  if (h <= 0.0) return std::numeric_limits<double>::infinity();
  double gap = 0.0;
  for (int i = 0; i < sys.num_points(); ++i) {
    if (w[i] >= 1.0) continue;
    try {
      const auto m = maximize_hi(liftone_coefficients(sys, w, i));
      gap = std::max(gap, m.h_star / h - 1.0);
    } catch (const DegenerateError&) {
    }
  }
  return gap;
}

inline Vector initial_allocation(int m, const LiftOneOptions& opt) {
  if (opt.initial_weights.size() > 0) {
    if (opt.initial_weights.size() != m) throw InvalidArgument("initial weights have the wrong length");
    return opt.initial_weights / opt.initial_weights.sum();
  }
  if (opt.init == InitKind::Uniform) return Vector::Constant(m, 1.0 / m);
  std::mt19937_64 rng(opt.seed);
  std::exponential_distribution<double> expo(1.0);
  Vector w(m);
  for (int i = 0; i < m; ++i) w[i] = expo(rng);
  return w / w.sum();
}

/// Lift-one coordinate ascent on a fixed information system.
inline LiftOneResult liftone_optimize(const InfoSystem& sys, const std::vector<Point>& points,
                                      const LiftOneOptions& opt = {}) {
  const int m = sys.num_points();
  const int p = sys.num_params();
  LiftOneResult res;
  res.seed = opt.seed;
  if (m < 1) throw InvalidArgument("no candidate points");

  if (p == 1) {
    // e_{i*} with i* = argmax nu_i q_1(x_i)^2.
    Vector score = sys.nu().cwiseProduct(sys.model_matrix().col(0).cwiseAbs2());
    Eigen::Index best = 0;
    score.maxCoeff(&best);
    if (!(score[best] > 0.0)) throw InfeasibleError("every candidate has zero information");
    Vector w = Vector::Zero(m);
    w[best] = 1.0;
    res.design = {points, w};
    res.h = sys.h(w);
    res.certified = true;
    res.method = "single-parameter";
    return res;
  }
  if (m < p) throw InfeasibleError("fewer candidate points than parameters: f(w) = 0 for every w");
  if (m == p) {
    Vector w = saturated_weights(sys.model_matrix(), sys.nu());
    res.design = {points, w};
    res.h = sys.h(w);
    res.certified = true;
    res.method = "saturated";
    res.h_trace = {res.h};
    return res;
  }

  Vector w = initial_allocation(m, opt);
  double h = sys.h(w);
  if (!(h > 0.0)) throw InfeasibleError("initial allocation is singular, so every allocation is (f(w) = 0)");
  res.h_trace.push_back(h);

  std::mt19937_64 rng(opt.seed);
  std::vector<int> order(m);
  std::iota(order.begin(), order.end(), 0);

  bool converged = false;
  int sweep = 0;
  for (; sweep < opt.max_sweeps; ++sweep) {
    const double h_start = h;
    std::shuffle(order.begin(), order.end(), rng);
    for (int i : order) {
      if (w[i] >= 1.0) continue;
      LiftMaximum best;
      try {
        best = maximize_hi(liftone_coefficients(sys, w, i));
      } catch (const DegenerateError&) {
        continue;
      }
      if (best.boundary_degenerate) ++res.degenerate_directions;
      if (best.x_star >= 1.0 - 1e-12) {
        ++res.rejected_updates;
        continue;
      }
      if (best.x_star == w[i]) continue;
      Vector next = detail::lift(w, i, best.x_star);
      next /= next.sum();
      const double h_next = sys.h(next);
      const double step = (h_next - h) / h;
      res.worst_step = std::min(res.worst_step, step);
      if (step < -1e-12) {
        ++res.rejected_updates;
        continue;
      }
      w = std::move(next);
      h = h_next;
    }
    res.h_trace.push_back(h);
    if (h - h_start <= opt.epsilon * h) {
      converged = true;
      ++sweep;
      break;
    }
  }
  if (!converged) throw NonConvergence("lift-one exceeded " + std::to_string(opt.max_sweeps) + " sweeps");

  for (int i = 0; i < m; ++i)
    if (w[i] < 1e-12) w[i] = 0.0;
  w /= w.sum();

  res.design = {points, w};
  res.h = sys.h(w);
  res.iterations = sweep;
  res.certified = liftone_certificate_gap(sys, w) <= opt.certificate_tol;
  return res;
}

inline LiftOneResult liftone_optimize(const GlmModel& model, const std::vector<Point>& points,
                                      const LiftOneOptions& opt = {}) {
  return liftone_optimize(InfoSystem(model, points), points, opt);
}

}  // namespace aopt
