#pragma once

// Design types, model matrices, Fisher information and the A-criterion
// h(w) = 1 / tr(F^{-1}) together with the determinant f(w) = |F| and the
// minors f_{-j}(w) = |X_{-j}^T W X_{-j}|.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include "aopt/errors.hpp"
#include "aopt/glm.hpp"

namespace aopt {

/// lambda_min <= kSingularTol * max(1, lambda_max) means singular.
inline constexpr double kSingularTol = 1e-12;

// ---------------------------------------------------------------------------
// Design space
// ---------------------------------------------------------------------------

struct ContinuousFactor {
  double lower;
  double upper;
};

struct DiscreteFactor {
  std::vector<double> levels;
};

using Factor = std::variant<ContinuousFactor, DiscreteFactor>;

/// Product of intervals and discrete level sets, optionally restricted to an
/// explicit list of allowed discrete-coordinate combinations.
///
/// Factors keep the caller's order; `permutation()` lists indices with the
/// continuous factors first, which is the order the search routines use.
class DesignSpace {
public:
  DesignSpace() = default;
  explicit DesignSpace(std::vector<Factor> factors,
                       std::optional<std::vector<std::vector<double>>> grid = std::nullopt)
      : factors_(std::move(factors)), grid_(std::move(grid)) {
    validate();
    for (int j = 0; j < dimension(); ++j) {
      if (std::holds_alternative<ContinuousFactor>(factors_[j]))
        continuous_.push_back(j);
      else
        discrete_.push_back(j);
    }
  }

  int dimension() const { return static_cast<int>(factors_.size()); }
  int num_continuous() const { return static_cast<int>(continuous_.size()); }
  const std::vector<Factor>& factors() const { return factors_; }
  const std::vector<int>& continuous_indices() const { return continuous_; }
  const std::vector<int>& discrete_indices() const { return discrete_; }
  const std::optional<std::vector<std::vector<double>>>& grid() const { return grid_; }

  std::vector<int> permutation() const {
    std::vector<int> perm = continuous_;
    perm.insert(perm.end(), discrete_.begin(), discrete_.end());
    return perm;
  }

  const ContinuousFactor& continuous(int j) const { return std::get<ContinuousFactor>(factors_[j]); }

  /// Allowed combinations of the discrete coordinates (in discrete_indices() order).
  /// A single empty combination when there are no discrete factors.
  std::vector<std::vector<double>> discrete_combinations() const {
    if (grid_) return *grid_;
    std::vector<std::vector<double>> out{{}};
    for (int j : discrete_) {
      const auto& lv = std::get<DiscreteFactor>(factors_[j]).levels;
      std::vector<std::vector<double>> next;
      next.reserve(out.size() * lv.size());
      for (const auto& prefix : out)
        for (double v : lv) {
          auto c = prefix;
          c.push_back(v);
          next.push_back(std::move(c));
        }
      out = std::move(next);
    }
    return out;
  }

  /// Assembles a full point from continuous and discrete parts.
  Point compose(const Vector& cont, const std::vector<double>& disc) const {
    Point x(dimension());
    for (std::size_t k = 0; k < continuous_.size(); ++k) x[continuous_[k]] = cont[static_cast<Eigen::Index>(k)];
    for (std::size_t k = 0; k < discrete_.size(); ++k) x[discrete_[k]] = disc[k];
    return x;
  }

  Vector continuous_part(const Point& x) const {
    Vector c(num_continuous());
    for (int k = 0; k < num_continuous(); ++k) c[k] = x[continuous_[k]];
    return c;
  }

  std::vector<double> discrete_part(const Point& x) const {
    std::vector<double> d;
    d.reserve(discrete_.size());
    for (int j : discrete_) d.push_back(x[j]);
    return d;
  }

  bool contains(const Point& x, double tol = 1e-12) const {
    if (x.size() != dimension()) return false;
    for (int j = 0; j < dimension(); ++j) {
      if (const auto* c = std::get_if<ContinuousFactor>(&factors_[j])) {
        if (x[j] < c->lower - tol || x[j] > c->upper + tol) return false;
      } else {
        const auto& lv = std::get<DiscreteFactor>(factors_[j]).levels;
        if (std::find(lv.begin(), lv.end(), x[j]) == lv.end()) return false;
      }
    }
    if (grid_) {
      const auto d = discrete_part(x);
      return std::find(grid_->begin(), grid_->end(), d) != grid_->end();
    }
    return true;
  }

private:
  void validate() const {
    if (factors_.empty()) throw InvalidArgument("design space has no factors");
    for (std::size_t j = 0; j < factors_.size(); ++j) {
      if (const auto* c = std::get_if<ContinuousFactor>(&factors_[j])) {
        if (!std::isfinite(c->lower) || !std::isfinite(c->upper) || !(c->lower < c->upper))
          throw InvalidArgument("factor " + std::to_string(j) + ": need finite lower < upper");
      } else if (std::get<DiscreteFactor>(factors_[j]).levels.empty()) {
        throw InvalidArgument("factor " + std::to_string(j) + ": empty level set");
      }
    }
    if (grid_) {
      std::vector<const DiscreteFactor*> disc;
      for (const auto& f : factors_)
        if (const auto* d = std::get_if<DiscreteFactor>(&f)) disc.push_back(d);
      if (grid_->empty()) throw InvalidArgument("discrete grid is empty");
      for (const auto& row : *grid_) {
        if (row.size() != disc.size()) throw InvalidArgument("grid row length differs from discrete factor count");
        for (std::size_t k = 0; k < row.size(); ++k) {
          const auto& lv = disc[k]->levels;
          if (std::find(lv.begin(), lv.end(), row[k]) == lv.end())
            throw InvalidArgument("grid value not among the declared levels");
        }
      }
    }
  }

  std::vector<Factor> factors_;
  std::optional<std::vector<std::vector<double>>> grid_;
  std::vector<int> continuous_;
  std::vector<int> discrete_;
};

// ---------------------------------------------------------------------------
// Designs
// ---------------------------------------------------------------------------

/// Support points with weights on the simplex.
struct ApproximateDesign {
  std::vector<Point> points;
  Vector weights;

  int size() const { return static_cast<int>(points.size()); }

  int support_size(double zero_tol = 0.0) const {
    return static_cast<int>((weights.array() > zero_tol).count());
  }

  /// m >= 1, matching lengths, nonnegative weights summing to 1, distinct points.
  void validate(double sum_tol = 1e-12) const {
    if (points.empty()) throw InvalidArgument("design has no points");
    if (weights.size() != size()) throw InvalidArgument("points and weights differ in length");
    if ((weights.array() < 0.0).any() || !weights.allFinite()) throw InvalidArgument("negative or non-finite weight");
    if (std::abs(weights.sum() - 1.0) > sum_tol) throw InvalidArgument("weights do not sum to 1");
    const auto d = points.front().size();
    std::set<std::vector<double>> seen;
    for (const auto& x : points) {
      if (x.size() != d) throw InvalidArgument("points differ in dimension");
      if (!seen.insert(std::vector<double>(x.data(), x.data() + x.size())).second)
        throw InvalidArgument("duplicate design point");
    }
  }
};

/// Support points with integer replicate counts.
struct ExactDesign {
  std::vector<Point> points;
  std::vector<long> counts;
  long n = 0;
};

// ---------------------------------------------------------------------------
// Linear algebra helpers
// ---------------------------------------------------------------------------

namespace detail {

/// Determinant of a symmetric PSD matrix: Cholesky, LU when Cholesky fails.
inline double det_psd(const Matrix& M) {
  if (M.rows() == 0) return 1.0;
  Eigen::LLT<Matrix> llt(M);
  if (llt.info() == Eigen::Success) {
    const auto& L = llt.matrixLLT();
    double d = 1.0;
    for (Eigen::Index k = 0; k < M.rows(); ++k) d *= L(k, k) * L(k, k);
    return d;
  }
  return std::max(0.0, Eigen::PartialPivLU<Matrix>(M).determinant());
}

/// M with row and column j removed.
inline Matrix drop_index(const Matrix& M, int j) {
  const auto n = M.rows();
  Matrix out(n - 1, n - 1);
  for (Eigen::Index r = 0, rr = 0; r < n; ++r) {
    if (r == j) continue;
    for (Eigen::Index c = 0, cc = 0; c < n; ++c) {
      if (c == j) continue;
      out(rr, cc++) = M(r, c);
    }
    ++rr;
  }
  return out;
}

inline bool is_singular(const Vector& eigenvalues) {
  const double lmax = eigenvalues.maxCoeff();
  return eigenvalues.minCoeff() <= kSingularTol * std::max(1.0, lmax);
}

}  // namespace detail

/// Model matrix X with row i equal to q(x_i)^T.
inline Matrix build_model_matrix(const GlmModel& model, const std::vector<Point>& points) {
  Matrix X(static_cast<Eigen::Index>(points.size()), model.predictor.size());
  for (std::size_t i = 0; i < points.size(); ++i) X.row(static_cast<Eigen::Index>(i)) = model.predictor.evaluate(points[i]).transpose();
  return X;
}

/// nu(beta^T q(x_i)) for every row of X.
inline Vector nu_values(const GlmModel& model, const Matrix& X) {
  Vector v(X.rows());
  const Vector eta = X * model.beta;
  for (Eigen::Index i = 0; i < X.rows(); ++i) v[i] = nu(model, eta[i]);
  return v;
}

/// Fixed model matrix and GLM weights; every objective is a function of the
/// (possibly un-normalized) allocation w.
class InfoSystem {
public:
  InfoSystem(Matrix X, Vector nu) : X_(std::move(X)), nu_(std::move(nu)) {
    if (X_.rows() != nu_.size()) throw InvalidArgument("model matrix and nu differ in length");
  }

  InfoSystem(const GlmModel& model, const std::vector<Point>& points)
      : X_(build_model_matrix(model, points)), nu_(nu_values(model, X_)) {}

  int num_points() const { return static_cast<int>(X_.rows()); }
  int num_params() const { return static_cast<int>(X_.cols()); }
  const Matrix& model_matrix() const { return X_; }
  const Vector& nu() const { return nu_; }

  /// F = sum_i w_i nu_i q_i q_i^T, as rank-one accumulation.
  Matrix fisher(const Vector& w) const {
    const int p = num_params();
    Matrix F = Matrix::Zero(p, p);
    for (Eigen::Index i = 0; i < X_.rows(); ++i) {
      const double s = w[i] * nu_[i];
      if (s == 0.0) continue;
      F.selfadjointView<Eigen::Lower>().rankUpdate(X_.row(i).transpose(), s);
    }
    return F.selfadjointView<Eigen::Lower>();
  }

  double f(const Vector& w) const { return detail::det_psd(fisher(w)); }

  double f_minor(const Vector& w, int j) const { return detail::det_psd(detail::drop_index(fisher(w), j)); }

  Vector f_minors(const Vector& w) const { return minors_of(fisher(w)); }

  double h(const Vector& w) const { return h_of(fisher(w)); }

  static Vector minors_of(const Matrix& F) {
    const int p = static_cast<int>(F.rows());
    Vector out(p);
    if (p == 1) {
      out[0] = 1.0;
      return out;
    }
    for (int j = 0; j < p; ++j) out[j] = detail::det_psd(detail::drop_index(F, j));
    return out;
  }

  /// 1 / tr(F^{-1}), or 0 when F is singular.
  static double h_of(const Matrix& F) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(F, Eigen::EigenvaluesOnly);
    const Vector& lam = es.eigenvalues();
    if (detail::is_singular(lam)) return 0.0;
    return 1.0 / lam.cwiseInverse().sum();
  }

private:
  Matrix X_;
  Vector nu_;
};

/// Fisher information of a design together with its spectral and minor data.
struct InfoDecomposition {
  Matrix model_matrix;
  Vector weight_diagonal;
  Matrix fisher;
  double det_f = 0.0;
  Vector minors;
  Vector eigenvalues;
  Matrix eigenvectors;
  double trace_inverse = std::numeric_limits<double>::infinity();

  bool singular() const { return !std::isfinite(trace_inverse); }
  double h() const { return singular() ? 0.0 : 1.0 / trace_inverse; }
  /// f / sum_j f_{-j}; agrees with h() whenever F is nonsingular.
  double h_ratio() const {
    const double s = minors.sum();
    return det_f > 0.0 && s > 0.0 ? det_f / s : 0.0;
  }
};

inline InfoDecomposition decompose(const Matrix& X, const Vector& nu, const Vector& w) {
  InfoDecomposition d;
  d.model_matrix = X;
  d.weight_diagonal = w.cwiseProduct(nu);
  d.fisher = InfoSystem(X, nu).fisher(w);
  Eigen::SelfAdjointEigenSolver<Matrix> es(d.fisher);
  d.eigenvalues = es.eigenvalues();
  d.eigenvectors = es.eigenvectors();
  d.minors = InfoSystem::minors_of(d.fisher);
  if (detail::is_singular(d.eigenvalues)) {
    d.det_f = 0.0;
    d.trace_inverse = std::numeric_limits<double>::infinity();
  } else {
    d.det_f = d.eigenvalues.prod();
    d.trace_inverse = d.eigenvalues.cwiseInverse().sum();
  }
  return d;
}

/// Fisher information F = X^T W X of an approximate design.
inline InfoDecomposition fisher_info(const GlmModel& model, const ApproximateDesign& design) {
  const Matrix X = build_model_matrix(model, design.points);
  return decompose(X, nu_values(model, X), design.weights);
}

/// A-criterion h = 1 / tr(F^{-1}); 0 for a singular design.
inline double h_value(const GlmModel& model, const ApproximateDesign& design) {
  return InfoSystem(model, design.points).h(design.weights);
}

/// |X_{-j}^T W X_{-j}| with j a 0-based column index.
inline double f_minor(const GlmModel& model, const ApproximateDesign& design, int j) {
  if (j < 0 || j >= model.num_params()) throw InvalidArgument("minor index out of range");
  return InfoSystem(model, design.points).f_minor(design.weights, j);
}

}  // namespace aopt
