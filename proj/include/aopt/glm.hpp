#pragma once

// GLM families and links, the GLM weight nu(eta) = [(g^-1)'(eta)]^2 / Var(Y)
// and its derivative, and the predictor basis q(x).

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <type_traits>
#include <utility>
#include <variant>
#include <vector>

#include "aopt/errors.hpp"

namespace aopt {

using Point = Eigen::VectorXd;
using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

// ---------------------------------------------------------------------------
// Families and links
// ---------------------------------------------------------------------------

enum class FamilyKind { Bernoulli, Binomial, Poisson, Gamma, InverseGaussian, Normal, Custom };

enum class Link { Logit, Probit, CLogLog, Log, Identity, Inverse, InverseSquared, Custom };

/// Response distribution together with its constant (n, k, lambda or sigma^2).
struct Family {
  FamilyKind kind = FamilyKind::Bernoulli;
  double constant = 1.0;

  static Family bernoulli() { return {FamilyKind::Bernoulli, 1.0}; }
  static Family binomial(int n_trials) { return {FamilyKind::Binomial, static_cast<double>(n_trials)}; }
  static Family poisson() { return {FamilyKind::Poisson, 1.0}; }
  static Family gamma(double shape) { return {FamilyKind::Gamma, shape}; }
  static Family inverse_gaussian(double lambda) { return {FamilyKind::InverseGaussian, lambda}; }
  static Family normal(double sigma2) { return {FamilyKind::Normal, sigma2}; }
  static Family custom() { return {FamilyKind::Custom, 1.0}; }

  bool operator==(const Family&) const = default;
};

inline std::string to_string(FamilyKind k) {
  switch (k) {
    case FamilyKind::Bernoulli: return "bernoulli";
    case FamilyKind::Binomial: return "binomial";
    case FamilyKind::Poisson: return "poisson";
    case FamilyKind::Gamma: return "gamma";
    case FamilyKind::InverseGaussian: return "inverse_gaussian";
    case FamilyKind::Normal: return "normal";
    case FamilyKind::Custom: return "custom";
  }
  return "?";
}

inline std::string to_string(Link l) {
  switch (l) {
    case Link::Logit: return "logit";
    case Link::Probit: return "probit";
    case Link::CLogLog: return "cloglog";
    case Link::Log: return "log";
    case Link::Identity: return "identity";
    case Link::Inverse: return "inverse";
    case Link::InverseSquared: return "inverse_squared";
    case Link::Custom: return "custom";
  }
  return "?";
}

inline std::optional<FamilyKind> family_from_string(const std::string& s) {
  for (auto k : {FamilyKind::Bernoulli, FamilyKind::Binomial, FamilyKind::Poisson, FamilyKind::Gamma,
                 FamilyKind::InverseGaussian, FamilyKind::Normal, FamilyKind::Custom})
    if (to_string(k) == s) return k;
  return std::nullopt;
}

inline std::optional<Link> link_from_string(const std::string& s) {
  for (auto l : {Link::Logit, Link::Probit, Link::CLogLog, Link::Log, Link::Identity, Link::Inverse,
                 Link::InverseSquared, Link::Custom})
    if (to_string(l) == s) return l;
  return std::nullopt;
}

namespace detail {

inline constexpr double kLogSqrt2Pi = 0.91893853320467274178;  // log(sqrt(2 pi))

inline double log_normal_pdf(double x) { return -0.5 * x * x - kLogSqrt2Pi; }

/// log Phi(x), accurate in both tails.
inline double log_normal_cdf(double x) {
  if (x > 0.0) return std::log1p(-0.5 * std::erfc(x / std::numbers::sqrt2));
  if (x > -30.0) return std::log(0.5 * std::erfc(-x / std::numbers::sqrt2));
  // Mills-ratio asymptotic series; next term is below 2e-12 relative here.
  const double z = 1.0 / (x * x);
  const double series = 1.0 - z * (1.0 - z * (3.0 - z * (15.0 - z * 105.0)));
  return log_normal_pdf(x) - std::log(-x) + std::log(series);
}

/// Value of g^{-1} and its first two derivatives at eta.
struct InverseLink {
  double mu;
  double d1;
  double d2;
};

inline InverseLink inverse_link(Link link, double eta) {
  switch (link) {
    case Link::Logit: {
      const double mu = 1.0 / (1.0 + std::exp(-eta));
      const double e = std::exp(-std::abs(eta));
      const double d1 = e / ((1.0 + e) * (1.0 + e));
      return {mu, d1, -d1 * std::tanh(0.5 * eta)};
    }
    case Link::Probit: {
      const double d1 = std::exp(log_normal_pdf(eta));
      return {std::exp(log_normal_cdf(eta)), d1, -eta * d1};
    }
    case Link::CLogLog: {
      const double t = std::exp(eta);
      const double d1 = std::exp(eta - t);
      return {-std::expm1(-t), d1, d1 * (1.0 - t)};
    }
    case Link::Log: {
      const double mu = std::exp(eta);
      return {mu, mu, mu};
    }
    case Link::Identity:
      return {eta, 1.0, 0.0};
    case Link::Inverse:
      if (eta == 0.0) throw DomainError("inverse link requires eta != 0");
      return {1.0 / eta, -1.0 / (eta * eta), 2.0 / (eta * eta * eta)};
    case Link::InverseSquared: {
      if (!(eta > 0.0)) throw DomainError("inverse-squared link requires eta > 0");
      const double r = 1.0 / std::sqrt(eta);
      return {r, -0.5 * r / eta, 0.75 * r / (eta * eta)};
    }
    case Link::Custom:
      break;
  }
  throw MissingHook("custom link has no built-in inverse");
}

/// Variance function V(mu) (per unit trial) and its derivative.
inline std::pair<double, double> variance(const Family& fam, double mu) {
  switch (fam.kind) {
    case FamilyKind::Bernoulli:
    case FamilyKind::Binomial:
      if (!(mu > 0.0 && mu < 1.0)) throw DomainError("binary mean outside (0,1)");
      return {mu * (1.0 - mu), 1.0 - 2.0 * mu};
    case FamilyKind::Poisson:
      if (!(mu > 0.0)) throw DomainError("Poisson mean must be positive");
      return {mu, 1.0};
    case FamilyKind::Gamma:
      if (!(mu > 0.0)) throw DomainError("Gamma mean must be positive");
      return {mu * mu / fam.constant, 2.0 * mu / fam.constant};
    case FamilyKind::InverseGaussian:
      if (!(mu > 0.0)) throw DomainError("inverse Gaussian mean must be positive");
      return {mu * mu * mu / fam.constant, 3.0 * mu * mu / fam.constant};
    case FamilyKind::Normal:
      return {fam.constant, 0.0};
    case FamilyKind::Custom:
      break;
  }
  throw MissingHook("custom family has no built-in variance");
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Predictor basis
// ---------------------------------------------------------------------------

namespace term {
struct Intercept {};
struct Linear {
  int factor;
};
struct Power {
  int factor;
  double exponent;
};
struct Interaction {
  std::vector<int> factors;
};
/// 1 when x[factor] == level exactly, else 0.
struct Indicator {
  int factor;
  double level;
};
/// Opaque evaluator. Without `gradient` the term is treated as non-smooth.
struct Custom {
  std::function<double(const Point&)> value;
  std::function<Vector(const Point&)> gradient;
  std::string name = "custom";
};
}  // namespace term

using BasisTerm = std::variant<term::Intercept, term::Linear, term::Power, term::Interaction,
                               term::Indicator, term::Custom>;

/// Ordered list of basis functions q_1..q_p. Factor indices are 0-based.
class PredictorBasis {
public:
  PredictorBasis() = default;
  explicit PredictorBasis(std::vector<BasisTerm> terms) : terms_(std::move(terms)) {}

  /// Intercept followed by one linear term per factor.
  static PredictorBasis main_effects(int d) {
    std::vector<BasisTerm> t{term::Intercept{}};
    for (int j = 0; j < d; ++j) t.emplace_back(term::Linear{j});
    return PredictorBasis(std::move(t));
  }

  int size() const { return static_cast<int>(terms_.size()); }
  const std::vector<BasisTerm>& terms() const { return terms_; }

  /// Largest factor index referenced, or -1.
  int max_factor() const {
    int mx = -1;
    for (const auto& t : terms_) {
      std::visit(
          [&](const auto& v) {
            using T = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<T, term::Linear> || std::is_same_v<T, term::Power> ||
                          std::is_same_v<T, term::Indicator>)
              mx = std::max(mx, v.factor);
            else if constexpr (std::is_same_v<T, term::Interaction>)
              for (int f : v.factors) mx = std::max(mx, f);
          },
          t);
    }
    return mx;
  }

  /// Throws InvalidArgument if any factor index lies outside [0, d).
  void validate(int d) const {
    if (terms_.empty()) throw InvalidArgument("predictor basis is empty");
    for (const auto& t : terms_) {
      std::visit(
          [&](const auto& v) {
            using T = std::decay_t<decltype(v)>;
            auto check = [&](int f) {
              if (f < 0 || f >= d)
                throw InvalidArgument("basis factor index " + std::to_string(f) + " outside [0, " +
                                      std::to_string(d) + ")");
            };
            if constexpr (std::is_same_v<T, term::Linear> || std::is_same_v<T, term::Power> ||
                          std::is_same_v<T, term::Indicator>)
              check(v.factor);
            else if constexpr (std::is_same_v<T, term::Interaction>) {
              if (v.factors.empty()) throw InvalidArgument("interaction term without factors");
              for (int f : v.factors) check(f);
            } else if constexpr (std::is_same_v<T, term::Custom>) {
              if (!v.value) throw MissingHook("custom basis term without evaluator");
            }
          },
          t);
    }
  }

  /// q(x).
  Vector evaluate(const Point& x) const {
    Vector q(size());
    for (int k = 0; k < size(); ++k) q[k] = evaluate_term(terms_[k], x);
    return q;
  }

  /// d q / d x restricted to the listed coordinates: a p x coords.size() matrix.
  Matrix jacobian(const Point& x, std::span<const int> coords) const {
    Matrix J = Matrix::Zero(size(), static_cast<Eigen::Index>(coords.size()));
    for (int k = 0; k < size(); ++k) {
      for (std::size_t c = 0; c < coords.size(); ++c) J(k, c) = term_derivative(terms_[k], x, coords[c]);
    }
    return J;
  }

  bool differentiable_in(std::span<const int> coords) const {
    for (const auto& t : terms_) {
      if (const auto* c = std::get_if<term::Custom>(&t); c && !c->gradient) return false;
      if (const auto* ind = std::get_if<term::Indicator>(&t)) {
        for (int f : coords)
          if (f == ind->factor) return false;
      }
    }
    return true;
  }

private:
  static double evaluate_term(const BasisTerm& t, const Point& x) {
    return std::visit(
        [&](const auto& v) -> double {
          using T = std::decay_t<decltype(v)>;
          if constexpr (std::is_same_v<T, term::Intercept>)
            return 1.0;
          else if constexpr (std::is_same_v<T, term::Linear>)
            return x[v.factor];
          else if constexpr (std::is_same_v<T, term::Power>)
            return std::pow(x[v.factor], v.exponent);
          else if constexpr (std::is_same_v<T, term::Interaction>) {
            double r = 1.0;
            for (int f : v.factors) r *= x[f];
            return r;
          } else if constexpr (std::is_same_v<T, term::Indicator>)
            return x[v.factor] == v.level ? 1.0 : 0.0;
          else
            return v.value(x);
        },
        t);
  }

  static double term_derivative(const BasisTerm& t, const Point& x, int coord) {
    return std::visit(
        [&](const auto& v) -> double {
          using T = std::decay_t<decltype(v)>;
          if constexpr (std::is_same_v<T, term::Intercept>)
            return 0.0;
          else if constexpr (std::is_same_v<T, term::Linear>)
            return v.factor == coord ? 1.0 : 0.0;
          else if constexpr (std::is_same_v<T, term::Power>) {
            if (v.factor != coord) return 0.0;
            if (v.exponent == 0.0) return 0.0;
            return v.exponent * std::pow(x[v.factor], v.exponent - 1.0);
          } else if constexpr (std::is_same_v<T, term::Interaction>) {
            double sum = 0.0;
            for (std::size_t a = 0; a < v.factors.size(); ++a) {
              if (v.factors[a] != coord) continue;
              double prod = 1.0;
              for (std::size_t b = 0; b < v.factors.size(); ++b)
                if (b != a) prod *= x[v.factors[b]];
              sum += prod;
            }
            return sum;
          } else if constexpr (std::is_same_v<T, term::Indicator>) {
            if (v.factor == coord)
              throw NonDifferentiableError("indicator term on a continuous factor");
            return 0.0;
          } else {
            if (!v.gradient) throw NonDifferentiableError("custom term '" + v.name + "' has no gradient");
            return v.gradient(x)[coord];
          }
        },
        t);
  }

  std::vector<BasisTerm> terms_;
};

// ---------------------------------------------------------------------------
// Model
// ---------------------------------------------------------------------------

/// Generalized linear model with assumed coefficients.
struct GlmModel {
  Family family = Family::bernoulli();
  Link link = Link::Logit;
  Vector beta;
  PredictorBasis predictor;
  std::function<double(double)> nu_hook;
  std::function<double(double)> nu_prime_hook;

  int num_params() const { return static_cast<int>(beta.size()); }

  bool uses_hooks() const { return family.kind == FamilyKind::Custom || link == Link::Custom; }

  /// Checks p = len(beta) = len(basis) >= 1, family constants, hook presence.
  void validate() const {
    if (beta.size() < 1) throw InvalidArgument("beta must have at least one coefficient");
    if (beta.size() != predictor.size())
      throw InvalidArgument("beta has " + std::to_string(beta.size()) + " coefficients but basis has " +
                            std::to_string(predictor.size()) + " terms");
    if (family.kind != FamilyKind::Custom && !(family.constant > 0.0))
      throw InvalidArgument("family constant must be positive");
    if (uses_hooks() && !nu_hook) throw MissingHook("custom family/link requires a nu hook");
  }
};

/// GLM weight nu(eta) = [(g^-1)'(eta)]^2 / Var(Y).
inline double nu(const GlmModel& model, double eta) {
  if (model.uses_hooks()) {
    if (!model.nu_hook) throw MissingHook("custom family/link requires a nu hook");
    const double v = model.nu_hook(eta);
    if (!(v >= 0.0) || !std::isfinite(v)) throw DomainError("nu hook returned a negative or non-finite value");
    return v;
  }
  const bool binary = model.family.kind == FamilyKind::Bernoulli || model.family.kind == FamilyKind::Binomial;
  const double trials = model.family.kind == FamilyKind::Binomial ? model.family.constant : 1.0;
  if (binary) {
    switch (model.link) {
      case Link::Logit: {
        const double e = std::exp(-std::abs(eta));
        return trials * e / ((1.0 + e) * (1.0 + e));
      }
      case Link::Probit:
        return trials * std::exp(2.0 * detail::log_normal_pdf(eta) - detail::log_normal_cdf(eta) -
                                 detail::log_normal_cdf(-eta));
      case Link::CLogLog: {
        const double t = std::exp(eta);
        if (std::isinf(t)) return 0.0;
        return trials * std::exp(2.0 * eta - t - std::log(-std::expm1(-t)));
      }
      default:
        break;
    }
  }
  if (!std::isfinite(eta)) throw DomainError("eta is not finite");
  const auto il = detail::inverse_link(model.link, eta);
  const auto [v, dv] = detail::variance(model.family, il.mu);
  if (!(v > 0.0)) throw DomainError("variance vanishes at this eta");
  return trials * il.d1 * il.d1 / v;
}

/// d nu / d eta.
inline double nu_prime(const GlmModel& model, double eta) {
  if (model.uses_hooks()) {
    if (!model.nu_prime_hook) throw MissingHook("custom family/link requires a nu_prime hook");
    return model.nu_prime_hook(eta);
  }
  const bool binary = model.family.kind == FamilyKind::Bernoulli || model.family.kind == FamilyKind::Binomial;
  const double trials = model.family.kind == FamilyKind::Binomial ? model.family.constant : 1.0;
  if (binary) {
    switch (model.link) {
      case Link::Logit:
        return -nu(model, eta) * std::tanh(0.5 * eta);
      case Link::Probit: {
        const double lpdf = detail::log_normal_pdf(eta);
        const double mills_lo = std::exp(lpdf - detail::log_normal_cdf(eta));
        const double mills_hi = std::exp(lpdf - detail::log_normal_cdf(-eta));
        return nu(model, eta) * (-2.0 * eta - mills_lo + mills_hi);
      }
      case Link::CLogLog: {
        const double v = nu(model, eta);
        if (v == 0.0) return 0.0;
        const double t = std::exp(eta);
        return v * (2.0 - t - t / std::expm1(t));
      }
      default:
        break;
    }
  }
  if (!std::isfinite(eta)) throw DomainError("eta is not finite");
  const auto il = detail::inverse_link(model.link, eta);
  const auto [v, dv] = detail::variance(model.family, il.mu);
  if (!(v > 0.0)) throw DomainError("variance vanishes at this eta");
  // d/deta [d1^2 / V(mu)] with dmu/deta = d1.
  return trials * (2.0 * il.d1 * il.d2 * v - il.d1 * il.d1 * il.d1 * dv) / (v * v);
}

/// beta^T q(x).
inline double linear_predictor(const GlmModel& model, const Point& x) {
  return model.beta.dot(model.predictor.evaluate(x));
}

/// Mean response g^{-1}(eta) for built-in links.
inline double mean_response(const GlmModel& model, double eta) {
  return detail::inverse_link(model.link, eta).mu;
}

}  // namespace aopt
