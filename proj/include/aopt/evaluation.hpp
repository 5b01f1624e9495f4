#pragma once

// Design-quality metrics and the stratified-sampling simulation study:
// relative A-efficiency, GLM maximum likelihood by IRLS, populations with
// simulated binary responses, stratified and simple random sampling, RMSE and
// holdout cross-entropy.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <ostream>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "aopt/design.hpp"
#include "aopt/errors.hpp"
#include "aopt/glm.hpp"
#include "aopt/liftone.hpp"
#include "aopt/parallel.hpp"
#include "aopt/rounding.hpp"

namespace aopt {

/// h(a) / h(b).
inline double relative_efficiency(const GlmModel& model, const ApproximateDesign& a, const ApproximateDesign& b) {
  const double hb = h_value(model, b);
  if (!(hb > 0.0)) throw SingularError("reference design has a singular information matrix");
  return h_value(model, a) / hb;
}

// ---------------------------------------------------------------------------
// GLM fitting
// ---------------------------------------------------------------------------

struct GlmFitOptions {
  /// Converged once |U(beta)| <= rel_tol * (1 + |U(beta_0)|).
  double rel_tol = 1e-8;
  int max_iter = 100;
  /// |beta_hat| above this is reported as separation.
  double separation_norm = 1e3;
};

struct GlmFitResult {
  Vector beta;
  int iterations = 0;
  bool converged = false;
  double score_norm = 0.0;
  double initial_score_norm = 0.0;
};

namespace detail {

/// Score vector and Fisher information at beta for responses y on the mean scale.
inline void score_and_information(const GlmModel& model, const Matrix& X, const Vector& y, const Vector& beta,
                                  Vector& U, Matrix& F) {
  const auto p = X.cols();
  U = Vector::Zero(p);
  F = Matrix::Zero(p, p);
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    const double eta = X.row(i).dot(beta);
    const double v = nu(model, eta);
    if (v == 0.0) continue;
    const auto il = inverse_link(model.link, eta);
    if (il.d1 == 0.0) continue;
    U += (v * (y[i] - il.mu) / il.d1) * X.row(i).transpose();
    F.selfadjointView<Eigen::Lower>().rankUpdate(X.row(i).transpose(), v);
  }
  F = F.selfadjointView<Eigen::Lower>();
}

inline Vector fit_start(const GlmModel& model, const Matrix& X, const Vector& y) {
  Vector beta = Vector::Zero(X.cols());
  if (model.link != Link::Inverse && model.link != Link::InverseSquared) return beta;
  // Constant fit through the intercept column when eta = 0 is outside the link domain.
  Eigen::Index icpt = -1;
  for (Eigen::Index j = 0; j < X.cols(); ++j)
    if ((X.col(j).array() == 1.0).all()) icpt = j;
  const double ybar = y.mean();
  if (icpt < 0 || !(ybar > 0.0)) throw InvalidArgument("inverse-link fit needs an intercept and a positive mean");
  beta[icpt] = model.link == Link::Inverse ? 1.0 / ybar : 1.0 / (ybar * ybar);
  return beta;
}

/// Bernoulli log-likelihood per trial with log(0) floored at log(1e-300).
inline double binary_loglik(const GlmModel& model, const Matrix& X, const Vector& y, const Vector& beta) {
  double ll = 0.0;
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    const double mu = inverse_link(model.link, X.row(i).dot(beta)).mu;
    if (y[i] > 0.0) ll += y[i] * std::log(std::max(mu, 1e-300));
    if (y[i] < 1.0) ll += (1.0 - y[i]) * std::log(std::max(1.0 - mu, 1e-300));
  }
  return ll;
}

/// The likelihood still rises along beta_hat out to norm `limit`, so the
/// maximizer lies beyond it.
inline bool diverges_beyond(const GlmModel& model, const Matrix& X, const Vector& y, const Vector& beta,
                            double limit) {
  const bool binary = model.family.kind == FamilyKind::Bernoulli || model.family.kind == FamilyKind::Binomial;
  const double norm = beta.norm();
  if (!binary || !(norm > 0.0) || norm >= limit) return false;
  const double at_fit = binary_loglik(model, X, y, beta);
  const double far = binary_loglik(model, X, y, beta * (limit / norm));
  return far >= at_fit - 1e-9 * (1.0 + std::abs(at_fit));
}

}  // namespace detail

/// Maximum likelihood by Fisher scoring (IRLS). `model` supplies family, link
/// and predictor; its beta is ignored. y is on the mean scale (proportions
/// for Binomial).
inline GlmFitResult glm_fit(const GlmModel& model, const std::vector<Point>& x, const Vector& y,
                            const GlmFitOptions& opt = {}) {
  if (x.empty()) throw InvalidArgument("no observations");
  if (static_cast<Eigen::Index>(x.size()) != y.size()) throw InvalidArgument("x and y differ in length");
  GlmModel work = model;
  work.beta = Vector::Zero(model.predictor.size());
  const Matrix X = build_model_matrix(work, x);
  const auto p = X.cols();
  Eigen::FullPivLU<Matrix> lu(X);
  if (lu.rank() < p) throw RankError("sample model matrix has rank " + std::to_string(lu.rank()) + " < " + std::to_string(p));

  GlmFitResult res;
  Vector beta = detail::fit_start(model, X, y);
  Vector U;
  Matrix F;
  detail::score_and_information(work, X, y, beta, U, F);
  res.initial_score_norm = U.norm();
  const double target = opt.rel_tol * (1.0 + res.initial_score_norm);

  for (int it = 0; it < opt.max_iter; ++it) {
    res.iterations = it;
    if (U.norm() <= target) {
      res.converged = true;
      break;
    }
    Eigen::LDLT<Matrix> ldlt(F);
    if (ldlt.info() != Eigen::Success || !(ldlt.rcond() > 1e-300)) break;
    const Vector step = ldlt.solve(U);
    // Halve the step until the score is defined and finite.
    double t = 1.0;
    bool ok = false;
    Vector next, U_next;
    Matrix F_next;
    for (int h = 0; h < 30; ++h, t *= 0.5) {
      next = beta + t * step;
      try {
        detail::score_and_information(work, X, y, next, U_next, F_next);
      } catch (const DomainError&) {
        continue;
      }
      if (U_next.allFinite() && F_next.allFinite()) {
        ok = true;
        break;
      }
    }
    if (!ok) throw NonConvergence("IRLS step left the link domain");
    beta = next;
    U = U_next;
    F = F_next;
    res.iterations = it + 1;
  }
  if (!res.converged && U.norm() <= target) res.converged = true;
  res.score_norm = U.norm();
  res.beta = beta;
  if (!beta.allFinite()) throw NonConvergence("IRLS produced non-finite coefficients");
  if (beta.norm() > opt.separation_norm || detail::diverges_beyond(work, X, y, beta, opt.separation_norm))
    throw SeparationError("maximum likelihood estimate diverges");
  return res;
}

// ---------------------------------------------------------------------------
// Populations and samplers
// ---------------------------------------------------------------------------

/// Strata x_i of sizes N_i with one simulated binary response per unit.
struct Population {
  std::vector<Point> strata;
  std::vector<long> sizes;
  std::vector<std::vector<int>> responses;
  std::uint64_t seed = 0;

  long total() const { return std::accumulate(sizes.begin(), sizes.end(), 0L); }
};

/// Unit indices drawn from each stratum.
struct Sample {
  std::vector<std::vector<long>> units;

  long size() const {
    long n = 0;
    for (const auto& u : units) n += static_cast<long>(u.size());
    return n;
  }
};

inline Population generate_population(const GlmModel& model, std::vector<Point> strata, std::vector<long> sizes,
                                      std::uint64_t seed) {
  if (model.family.kind != FamilyKind::Bernoulli) throw InvalidArgument("populations need a Bernoulli family");
  if (strata.size() != sizes.size()) throw InvalidArgument("strata and sizes differ in length");
  Population pop{std::move(strata), std::move(sizes), {}, seed};
  std::mt19937_64 rng(seed);
  for (std::size_t i = 0; i < pop.strata.size(); ++i) {
    if (pop.sizes[i] < 0) throw InvalidArgument("negative stratum size");
    const double mu = mean_response(model, linear_predictor(model, pop.strata[i]));
    std::bernoulli_distribution draw(mu);
    std::vector<int> y(static_cast<std::size_t>(pop.sizes[i]));
    for (auto& v : y) v = draw(rng) ? 1 : 0;
    pop.responses.push_back(std::move(y));
  }
  return pop;
}

namespace detail {

/// k distinct sorted indices from [0, N) by a partial Fisher-Yates shuffle.
inline std::vector<long> choose_without_replacement(long N, long k, std::mt19937_64& rng) {
  std::vector<long> idx(static_cast<std::size_t>(N));
  std::iota(idx.begin(), idx.end(), 0L);
  for (long i = 0; i < k; ++i) {
    std::uniform_int_distribution<long> pick(i, N - 1);
    std::swap(idx[i], idx[pick(rng)]);
  }
  idx.resize(static_cast<std::size_t>(k));
  std::sort(idx.begin(), idx.end());
  return idx;
}

}  // namespace detail

/// Simple random sample without replacement of n_i units within stratum i.
inline Sample stratified_sample(const Population& pop, const std::vector<long>& counts, std::uint64_t seed) {
  if (counts.size() != pop.sizes.size()) throw InvalidArgument("allocation and strata differ in length");
  for (std::size_t i = 0; i < counts.size(); ++i) {
    if (counts[i] < 0) throw AllocationError("negative allocation in stratum " + std::to_string(i));
    if (counts[i] > pop.sizes[i])
      throw AllocationError("allocation " + std::to_string(counts[i]) + " exceeds stratum size " +
                            std::to_string(pop.sizes[i]) + " in stratum " + std::to_string(i));
  }
  std::mt19937_64 rng(seed);
  Sample s;
  for (std::size_t i = 0; i < counts.size(); ++i)
    s.units.push_back(detail::choose_without_replacement(pop.sizes[i], counts[i], rng));
  return s;
}

inline Sample stratified_sample(const Population& pop, const ExactDesign& allocation, std::uint64_t seed) {
  return stratified_sample(pop, allocation.counts, seed);
}

/// Simple random sample without replacement of n units from the whole population.
inline Sample srswor(const Population& pop, long n, std::uint64_t seed) {
  const long N = pop.total();
  if (n < 0 || n > N) throw AllocationError("sample size exceeds population size");
  std::mt19937_64 rng(seed);
  const auto flat = detail::choose_without_replacement(N, n, rng);
  Sample s;
  s.units.resize(pop.sizes.size());
  std::size_t stratum = 0;
  long offset = 0;
  for (long u : flat) {
    while (u >= offset + pop.sizes[stratum]) offset += pop.sizes[stratum++];
    s.units[stratum].push_back(u - offset);
  }
  return s;
}

/// Fits the model to the sampled units.
inline GlmFitResult fit_sample(const GlmModel& model, const Population& pop, const Sample& s,
                               const GlmFitOptions& opt = {}) {
  std::vector<Point> x;
  std::vector<double> y;
  for (std::size_t i = 0; i < s.units.size(); ++i)
    for (long u : s.units[i]) {
      x.push_back(pop.strata[i]);
      y.push_back(pop.responses[i][static_cast<std::size_t>(u)]);
    }
  return glm_fit(model, x, Eigen::Map<const Vector>(y.data(), static_cast<Eigen::Index>(y.size())), opt);
}

// ---------------------------------------------------------------------------
// Metrics
// ---------------------------------------------------------------------------

/// [sum_{i in I} (beta_hat_i - beta_i)^2 / |I|]^{1/2}.
inline double rmse(const Vector& beta_hat, const Vector& beta_true, std::span<const int> indices) {
  if (indices.empty()) throw InvalidArgument("empty index set");
  if (beta_hat.size() != beta_true.size()) throw InvalidArgument("coefficient vectors differ in length");
  double s = 0.0;
  for (int i : indices) {
    if (i < 0 || i >= beta_hat.size()) throw InvalidArgument("coefficient index out of range");
    const double e = beta_hat[i] - beta_true[i];
    s += e * e;
  }
  return std::sqrt(s / static_cast<double>(indices.size()));
}

inline constexpr double kProbabilityClamp = 1e-12;

/// -(1/N) sum over strata of [ones_i log p_i + zeros_i log(1 - p_i)], with p
/// clamped to [1e-12, 1 - 1e-12].
inline double cross_entropy(const Vector& p_hat, const std::vector<long>& ones, const std::vector<long>& zeros) {
  if (static_cast<std::size_t>(p_hat.size()) != ones.size() || ones.size() != zeros.size())
    throw InvalidArgument("cross-entropy inputs differ in length");
  double total = 0.0;
  long N = 0;
  for (std::size_t i = 0; i < ones.size(); ++i) {
    const double p = std::clamp(p_hat[static_cast<Eigen::Index>(i)], kProbabilityClamp, 1.0 - kProbabilityClamp);
    total += static_cast<double>(ones[i]) * std::log(p) + static_cast<double>(zeros[i]) * std::log1p(-p);
    N += ones[i] + zeros[i];
  }
  if (N == 0) throw InvalidArgument("empty holdout");
  return -total / static_cast<double>(N);
}

/// Cross-entropy of the fitted model on the units not in the sample.
inline double holdout_cross_entropy(const GlmModel& model, const Vector& beta_hat, const Population& pop,
                                    const Sample& s) {
  const auto m = pop.strata.size();
  Vector p(static_cast<Eigen::Index>(m));
  std::vector<long> ones(m, 0), zeros(m, 0);
  GlmModel fitted = model;
  fitted.beta = beta_hat;
  for (std::size_t i = 0; i < m; ++i) {
    p[static_cast<Eigen::Index>(i)] = mean_response(fitted, linear_predictor(fitted, pop.strata[i]));
    std::vector<char> taken(pop.responses[i].size(), 0);
    for (long u : s.units[i]) taken[static_cast<std::size_t>(u)] = 1;
    for (std::size_t u = 0; u < taken.size(); ++u) {
      if (taken[u]) continue;
      (pop.responses[i][u] ? ones[i] : zeros[i]) += 1;
    }
  }
  return cross_entropy(p, ones, zeros);
}

// ---------------------------------------------------------------------------
// Stratified sampling study
// ---------------------------------------------------------------------------

struct SamplerSpec {
  enum class Kind { Allocation, Srswor, AOptimal };
  std::string name;
  Kind kind = Kind::Allocation;
  /// Counts per stratum for Kind::Allocation.
  std::vector<long> allocation;
};

struct StudyConfig {
  GlmModel model;
  std::vector<Point> strata;
  std::vector<long> sizes;
  long n = 0;
  std::vector<SamplerSpec> samplers;
  int replications = 100;
  std::uint64_t seed = 20240601;
  int threads = 1;
  /// Indices for the "all except beta_0" RMSE; defaults to 1..p-1.
  std::vector<int> rest_indices;
};

struct StudyRow {
  int replication = 0;
  std::string sampler;
  double rmse_b0 = std::numeric_limits<double>::quiet_NaN();
  double rmse_rest = std::numeric_limits<double>::quiet_NaN();
  double ce = std::numeric_limits<double>::quiet_NaN();
  /// Empty when the fit succeeded; otherwise the failure class.
  std::string failure;
};

struct SamplerSummary {
  std::string sampler;
  std::vector<long> allocation;
  int fits = 0;
  int excluded = 0;
  double mean_rmse_b0 = 0.0, sd_rmse_b0 = 0.0;
  double mean_rmse_rest = 0.0, sd_rmse_rest = 0.0;
  double mean_ce = 0.0, sd_ce = 0.0;
};

struct StudyReport {
  std::vector<StudyRow> rows;
  std::vector<SamplerSummary> summaries;
};

namespace detail {

inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t a, std::uint64_t b) {
  std::seed_seq seq{static_cast<std::uint32_t>(master), static_cast<std::uint32_t>(master >> 32),
                    static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(b)};
  std::uint32_t out[2];
  seq.generate(out, out + 2);
  return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

inline std::pair<double, double> mean_sd(const std::vector<double>& v) {
  if (v.empty()) return {std::numeric_limits<double>::quiet_NaN(), std::numeric_limits<double>::quiet_NaN()};
  const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  if (v.size() < 2) return {mean, 0.0};
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return {mean, std::sqrt(ss / static_cast<double>(v.size() - 1))};
}

}  // namespace detail

/// Locally A-optimal exact allocation of n units over the strata.
inline std::vector<long> a_optimal_allocation(const GlmModel& model, const std::vector<Point>& strata, long n) {
  const auto lifted = liftone_optimize(model, strata);
  return round_allocation(model, lifted.design, n).counts;
}

inline StudyReport run_stratified_study(const StudyConfig& cfg) {
  cfg.model.validate();
  if (cfg.replications < 1) throw InvalidArgument("replications must be positive");
  if (cfg.samplers.empty()) throw InvalidArgument("no samplers");
  const int p = cfg.model.num_params();
  std::vector<int> rest = cfg.rest_indices;
  if (rest.empty())
    for (int j = 1; j < p; ++j) rest.push_back(j);
  const int b0[] = {0};

  std::vector<SamplerSpec> samplers = cfg.samplers;
  for (auto& s : samplers) {
    if (s.kind == SamplerSpec::Kind::AOptimal) {
      s.allocation = a_optimal_allocation(cfg.model, cfg.strata, cfg.n);
      s.kind = SamplerSpec::Kind::Allocation;
    }
    if (s.kind == SamplerSpec::Kind::Allocation) {
      if (s.allocation.size() != cfg.strata.size()) throw InvalidArgument("sampler '" + s.name + "': wrong allocation length");
      if (std::accumulate(s.allocation.begin(), s.allocation.end(), 0L) != cfg.n)
        throw InvalidArgument("sampler '" + s.name + "': allocation does not sum to n");
    }
  }

  const std::size_t S = samplers.size();
  std::vector<StudyRow> rows(static_cast<std::size_t>(cfg.replications) * S);
  detail::run_parallel(static_cast<std::size_t>(cfg.replications), cfg.threads, [&](std::size_t r) {
    const auto pop = generate_population(cfg.model, cfg.strata, cfg.sizes, detail::derive_seed(cfg.seed, r, 0));
    for (std::size_t k = 0; k < S; ++k) {
      StudyRow& row = rows[r * S + k];
      row.replication = static_cast<int>(r);
      row.sampler = samplers[k].name;
      const auto seed = detail::derive_seed(cfg.seed, r, k + 1);
      const Sample s = samplers[k].kind == SamplerSpec::Kind::Srswor ? srswor(pop, cfg.n, seed)
                                                                     : stratified_sample(pop, samplers[k].allocation, seed);
      try {
        const auto fit = fit_sample(cfg.model, pop, s);
        row.rmse_b0 = rmse(fit.beta, cfg.model.beta, b0);
        row.rmse_rest = rmse(fit.beta, cfg.model.beta, rest);
        row.ce = holdout_cross_entropy(cfg.model, fit.beta, pop, s);
      } catch (const SeparationError&) {
        row.failure = "separation";
      } catch (const RankError&) {
        row.failure = "rank";
      } catch (const NonConvergence&) {
        row.failure = "nonconvergence";
      }
    }
  });

  StudyReport rep;
  rep.rows = std::move(rows);
  for (std::size_t k = 0; k < S; ++k) {
    SamplerSummary sum;
    sum.sampler = samplers[k].name;
    sum.allocation = samplers[k].allocation;
    std::vector<double> a, b, c;
    for (const auto& row : rep.rows) {
      if (row.sampler != sum.sampler) continue;
      if (!row.failure.empty()) {
        ++sum.excluded;
        continue;
      }
      a.push_back(row.rmse_b0);
      b.push_back(row.rmse_rest);
      c.push_back(row.ce);
    }
    sum.fits = static_cast<int>(a.size());
    std::tie(sum.mean_rmse_b0, sum.sd_rmse_b0) = detail::mean_sd(a);
    std::tie(sum.mean_rmse_rest, sum.sd_rmse_rest) = detail::mean_sd(b);
    std::tie(sum.mean_ce, sum.sd_ce) = detail::mean_sd(c);
    rep.summaries.push_back(std::move(sum));
  }
  return rep;
}

/// Per-replication CSV: replication, sampler, rmse_b0, rmse_rest, ce.
inline void write_study_csv(std::ostream& os, const StudyReport& rep) {
  const auto old = os.precision(17);
  os << "replication,sampler,rmse_b0,rmse_rest,ce\n";
  for (const auto& r : rep.rows) {
    os << r.replication << ',' << r.sampler << ',';
    if (r.failure.empty())
      os << r.rmse_b0 << ',' << r.rmse_rest << ',' << r.ce << '\n';
    else
      os << "NA,NA,NA\n";
  }
  os.precision(old);
}

}  // namespace aopt
