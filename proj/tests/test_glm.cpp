#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "aopt/glm.hpp"
#include "models.hpp"
#include "oracles.hpp"

using namespace aopt;

namespace {

GlmModel make(Family f, Link l, int p = 1) {
  GlmModel m;
  m.family = f;
  m.link = l;
  m.predictor = PredictorBasis::main_effects(p - 1);
  m.beta = Vector::Zero(p);
  return m;
}

struct Pair {
  Family family;
  Link link;
  double lo, hi;
};

std::vector<Pair> supported_pairs() {
  return {
      {Family::bernoulli(), Link::Logit, -30, 30},     {Family::bernoulli(), Link::Probit, -8, 8},
      {Family::bernoulli(), Link::CLogLog, -10, 3},    {Family::binomial(5), Link::Logit, -20, 20},
      {Family::binomial(3), Link::Probit, -6, 6},      {Family::poisson(), Link::Log, -5, 5},
      {Family::poisson(), Link::Identity, 0.1, 20},    {Family::gamma(1.0), Link::Inverse, 0.05, 10},
      {Family::gamma(2.5), Link::Log, -4, 4},          {Family::gamma(2.0), Link::Identity, 0.1, 10},
      {Family::inverse_gaussian(2.0), Link::InverseSquared, 0.05, 10},
      {Family::inverse_gaussian(1.5), Link::Log, -3, 3}, {Family::normal(1.0), Link::Identity, -10, 10},
      {Family::normal(0.5), Link::Log, -3, 3},
  };
}

}  // namespace

TEST(Nu, BernoulliLogitAtZero) { EXPECT_DOUBLE_EQ(nu(make(Family::bernoulli(), Link::Logit), 0.0), 0.25); }

TEST(Nu, NormalIdentityIsInverseVariance) {
  EXPECT_DOUBLE_EQ(nu(make(Family::normal(1.0), Link::Identity), 2.7), 1.0);
  EXPECT_DOUBLE_EQ(nu(make(Family::normal(4.0), Link::Identity), -1.0), 0.25);
}

TEST(Nu, PoissonLogMatchesDefinition) {
  // mu = e^eta, (g^-1)' = e^eta, V = mu.
  const double eta = 1.0;
  const double d1 = oracle::central_diff([](double e) { return std::exp(e); }, eta, 1e-5);
  EXPECT_NEAR(nu(make(Family::poisson(), Link::Log), eta), d1 * d1 / std::exp(eta), 1e-9);
  EXPECT_NEAR(nu(make(Family::poisson(), Link::Log), eta), std::numbers::e, 1e-12);
}

TEST(Nu, GammaInverseMatchesDefinition) {
  // mu = 1/eta, V = mu^2 / k.
  const double k = 1.0, eta = 2.0;
  const double d1 = oracle::central_diff([](double e) { return 1.0 / e; }, eta, 1e-5);
  const double mu = 1.0 / eta;
  EXPECT_NEAR(nu(make(Family::gamma(k), Link::Inverse), eta), d1 * d1 / (mu * mu / k), 1e-9);
  EXPECT_DOUBLE_EQ(nu(make(Family::gamma(k), Link::Inverse), eta), 0.25);
}

TEST(Nu, BinomialScalesBernoulli) {
  for (double eta : {-2.0, 0.3, 4.0})
    EXPECT_NEAR(nu(make(Family::binomial(7), Link::Probit), eta), 7.0 * nu(make(Family::bernoulli(), Link::Probit), eta),
                1e-14);
}

TEST(Nu, ProbitClosedForm) {
  for (double eta : {-3.0, -0.5, 0.0, 1.2, 4.0}) {
    const double pdf = std::exp(-0.5 * eta * eta) / std::sqrt(2.0 * std::numbers::pi);
    const double cdf = 0.5 * std::erfc(-eta / std::numbers::sqrt2);
    EXPECT_NEAR(nu(make(Family::bernoulli(), Link::Probit), eta), pdf * pdf / (cdf * (1.0 - cdf)), 1e-12);
  }
}

TEST(Nu, ProbitTailsStayFinite) {
  const auto m = make(Family::bernoulli(), Link::Probit);
  for (double eta : {-30.0, -12.0, 12.0, 30.0}) {
    const double v = nu(m, eta);
    EXPECT_TRUE(std::isfinite(v));
    EXPECT_GT(v, 0.0);
    EXPECT_TRUE(std::isfinite(nu_prime(m, eta)));
  }
  // phi(40) underflows, so nu is exactly zero there.
  EXPECT_EQ(nu(m, 40.0), 0.0);
  EXPECT_TRUE(std::isfinite(nu_prime(m, -40.0)));
  // nu ~ |eta| phi(eta) / ... decays; compare the asymptotic ratio nu(eta)/ (eta * phi(eta)).
  const double eta = 20.0;
  const double pdf = std::exp(-0.5 * eta * eta) / std::sqrt(2.0 * std::numbers::pi);
  EXPECT_NEAR(nu(m, eta) / (eta * pdf), 1.0, 1e-2);
}

TEST(Nu, CloglogMatchesDefinition) {
  const auto m = make(Family::bernoulli(), Link::CLogLog);
  for (double eta : {-3.0, -0.2, 0.0, 1.0}) {
    const double mu = 1.0 - std::exp(-std::exp(eta));
    const double d1 = std::exp(eta - std::exp(eta));
    EXPECT_NEAR(nu(m, eta), d1 * d1 / (mu * (1.0 - mu)), 1e-12);
  }
}

TEST(Nu, InverseLinkDomain) {
  EXPECT_THROW(nu(make(Family::gamma(1.0), Link::Inverse), 0.0), DomainError);
  EXPECT_THROW(nu(make(Family::gamma(1.0), Link::Inverse), -1.0), DomainError);
  EXPECT_THROW(nu(make(Family::inverse_gaussian(1.0), Link::InverseSquared), -0.5), DomainError);
}

TEST(Nu, CustomNeedsHook) {
  auto m = make(Family::custom(), Link::Logit);
  EXPECT_THROW(nu(m, 0.0), MissingHook);
  EXPECT_THROW(m.validate(), MissingHook);
  m.nu_hook = [](double e) { return 1.0 + e * e; };
  m.nu_prime_hook = [](double e) { return 2.0 * e; };
  EXPECT_DOUBLE_EQ(nu(m, 2.0), 5.0);
  EXPECT_DOUBLE_EQ(nu_prime(m, 2.0), 4.0);
  m.nu_hook = [](double) { return -1.0; };
  EXPECT_THROW(nu(m, 0.0), DomainError);
}

TEST(NuPrime, Examples) {
  EXPECT_DOUBLE_EQ(nu_prime(make(Family::bernoulli(), Link::Logit), 0.0), 0.0);
  EXPECT_NEAR(nu_prime(make(Family::poisson(), Link::Log), 0.0), 1.0, 1e-15);
  // nu = k / eta^2 => nu' = -2k / eta^3.
  EXPECT_NEAR(nu_prime(make(Family::gamma(2.0), Link::Inverse), 1.0), -4.0, 1e-12);
}

TEST(NuPrime, MatchesFiniteDifferencesForAllPairs) {
  std::mt19937_64 rng(11);
  for (const auto& pr : supported_pairs()) {
    const auto m = make(pr.family, pr.link);
    std::uniform_real_distribution<double> U(pr.lo, pr.hi);
    for (int r = 0; r < 1000; ++r) {
      const double eta = U(rng);
      const double fd = oracle::central_diff([&](double e) { return nu(m, e); }, eta, 1e-5);
      const double an = nu_prime(m, eta);
      ASSERT_NEAR(an, fd, 1e-6 * std::max(1.0, std::abs(an)))
          << to_string(pr.family.kind) << "/" << to_string(pr.link) << " at eta=" << eta;
    }
  }
}

TEST(Nu, NonnegativeOnDomain) {
  std::mt19937_64 rng(12);
  for (const auto& pr : supported_pairs()) {
    const auto m = make(pr.family, pr.link);
    std::uniform_real_distribution<double> U(pr.lo, pr.hi);
    for (int r = 0; r < 1000; ++r) {
      const double v = nu(m, U(rng));
      ASSERT_GE(v, 0.0);
      ASSERT_TRUE(std::isfinite(v));
    }
  }
}

TEST(Nu, LogitSymmetric) {
  const auto m = make(Family::bernoulli(), Link::Logit);
  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> U(-50, 50);
  for (int r = 0; r < 1000; ++r) {
    const double eta = U(rng);
    ASSERT_DOUBLE_EQ(nu(m, eta), nu(m, -eta));
  }
}

TEST(LinearPredictor, Examples) {
  const auto m = fixtures::logistic_one_factor();
  Point x(1);
  x << 0.2579;
  EXPECT_NEAR(linear_predictor(m, x), -1.87105, 1e-12);

  const auto g = fixtures::gamma_two_factor(1.0);
  Point y(2);
  y << 1, 1;
  EXPECT_DOUBLE_EQ(linear_predictor(g, y), 3.0);

  auto z = fixtures::pcb_model();
  z.beta.setZero();
  EXPECT_DOUBLE_EQ(linear_predictor(z, fixtures::pcb_points()[1]), 0.0);
}

TEST(Basis, EvaluateTerms) {
  PredictorBasis b({term::Intercept{}, term::Linear{1}, term::Power{0, 2.0}, term::Interaction{{0, 1}},
                    term::Indicator{2, 3.0}});
  Point x(3);
  x << 2.0, -1.5, 3.0;
  const Vector q = b.evaluate(x);
  EXPECT_DOUBLE_EQ(q[0], 1.0);
  EXPECT_DOUBLE_EQ(q[1], -1.5);
  EXPECT_DOUBLE_EQ(q[2], 4.0);
  EXPECT_DOUBLE_EQ(q[3], -3.0);
  EXPECT_DOUBLE_EQ(q[4], 1.0);
  x[2] = 2.0;
  EXPECT_DOUBLE_EQ(b.evaluate(x)[4], 0.0);
}

TEST(Basis, JacobianMatchesFiniteDifferences) {
  PredictorBasis b({term::Intercept{}, term::Linear{0}, term::Power{1, 3.0}, term::Interaction{{0, 1, 2}},
                    term::Power{2, 0.5}});
  std::mt19937_64 rng(14);
  std::uniform_real_distribution<double> U(0.2, 2.0);
  const std::vector<int> coords{0, 1, 2};
  for (int r = 0; r < 100; ++r) {
    Point x(3);
    for (int j = 0; j < 3; ++j) x[j] = U(rng);
    const Matrix J = b.jacobian(x, coords);
    for (int k = 0; k < b.size(); ++k) {
      const Vector fd = oracle::central_grad([&](const Point& y) { return b.evaluate(y)[k]; }, x, coords, 1e-6);
      for (int c = 0; c < 3; ++c) ASSERT_NEAR(J(k, c), fd[c], 1e-6 * std::max(1.0, std::abs(fd[c])));
    }
  }
}

TEST(Basis, DifferentiabilityRules) {
  PredictorBasis b({term::Intercept{}, term::Linear{0}, term::Indicator{1, 1.0}});
  const std::vector<int> cont{0}, both{0, 1};
  EXPECT_TRUE(b.differentiable_in(cont));
  EXPECT_FALSE(b.differentiable_in(both));
  Point x(2);
  x << 0.5, 1.0;
  EXPECT_THROW(b.jacobian(x, both), NonDifferentiableError);
}

TEST(Basis, ValidateFactorRange) {
  PredictorBasis b({term::Intercept{}, term::Linear{2}});
  EXPECT_NO_THROW(b.validate(3));
  EXPECT_THROW(b.validate(2), InvalidArgument);
}

TEST(Model, ValidateShapes) {
  auto m = fixtures::pcb_model();
  EXPECT_NO_THROW(m.validate());
  m.beta = Vector::Zero(3);
  EXPECT_THROW(m.validate(), InvalidArgument);
  auto g = fixtures::gamma_two_factor(1.0);
  g.family.constant = 0.0;
  EXPECT_THROW(g.validate(), InvalidArgument);
}

TEST(Names, RoundTrip) {
  for (auto k : {FamilyKind::Bernoulli, FamilyKind::Binomial, FamilyKind::Poisson, FamilyKind::Gamma,
                 FamilyKind::InverseGaussian, FamilyKind::Normal})
    EXPECT_EQ(family_from_string(to_string(k)), k);
  for (auto l : {Link::Logit, Link::Probit, Link::CLogLog, Link::Log, Link::Identity, Link::Inverse,
                 Link::InverseSquared})
    EXPECT_EQ(link_from_string(to_string(l)), l);
  EXPECT_FALSE(family_from_string("gaussian").has_value());
}
