#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "aopt/forlion.hpp"
#include "models.hpp"
#include "oracles.hpp"

using namespace aopt;

namespace {

struct Pair {
  Family family;
  Link link;
  double lo;
  double hi;
};

std::vector<Pair> supported_pairs() {
  return {
      {Family::bernoulli(), Link::Logit, -4, 4},      {Family::bernoulli(), Link::Probit, -3, 3},
      {Family::bernoulli(), Link::CLogLog, -3, 1.5},  {Family::binomial(5), Link::Logit, -4, 4},
      {Family::poisson(), Link::Log, -2, 2},          {Family::poisson(), Link::Identity, 0.2, 5},
      {Family::gamma(1.0), Link::Inverse, 0.2, 4},    {Family::gamma(2.5), Link::Log, -2, 2},
      {Family::inverse_gaussian(2.0), Link::InverseSquared, 0.2, 4},
      {Family::normal(1.0), Link::Identity, -3, 3},   {Family::normal(0.5), Link::Log, -2, 2},
  };
}

/// Two-factor model with an interaction whose linear predictor stays in [lo, hi] on [0, 1]^2.
GlmModel interaction_model(const Pair& pr) {
  GlmModel m;
  m.family = pr.family;
  m.link = pr.link;
  m.predictor = PredictorBasis({term::Intercept{}, term::Linear{0}, term::Linear{1}, term::Interaction{{0, 1}}});
  const double r = pr.hi - pr.lo;
  m.beta = Vector(4);
  m.beta << pr.lo + 0.1 * r, 0.3 * r, 0.3 * r, 0.1 * r;
  return m;
}

Point pt(std::initializer_list<double> v) {
  Point x(static_cast<Eigen::Index>(v.size()));
  Eigen::Index k = 0;
  for (double a : v) x[k++] = a;
  return x;
}

double min_pairwise_distance(const std::vector<Point>& pts) {
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < pts.size(); ++i)
    for (std::size_t j = i + 1; j < pts.size(); ++j) best = std::min(best, (pts[i] - pts[j]).norm());
  return best;
}

ForlionConfig config_with_delta(double delta) {
  ForlionConfig c;
  c.delta = delta;
  return c;
}

}  // namespace

// ---------------------------------------------------------------------------
// Sensitivity
// ---------------------------------------------------------------------------

TEST(Sensitivity, GradientMatchesCentralDifferences) {
  std::mt19937_64 rng(41);
  std::uniform_real_distribution<double> U(0.0, 1.0), V(0.05, 0.95);
  const auto space = fixtures::box({{0, 1}, {0, 1}});
  const std::vector<int> coords{0, 1};
  for (const auto& pr : supported_pairs()) {
    const auto model = interaction_model(pr);
    for (int r = 0; r < 100; ++r) {
      std::vector<Point> pts;
      for (int i = 0; i < 6; ++i) pts.push_back(pt({U(rng), U(rng)}));
      Vector w = (Vector::Random(6).array() + 1.5).matrix();
      w /= w.sum();
      const ApproximateDesign d{pts, w};
      const Sensitivity phi(model, d);
      const Point x = pt({V(rng), V(rng)});
      const Vector g = phi.gradient(x, coords);
      const Vector fd = oracle::central_grad([&](const Point& y) { return phi(y); }, x, coords, 1e-5);
      const double scale = std::max(g.norm(), 1e-6 * phi(x));
      ASSERT_LE((g - fd).norm(), 1e-5 * scale)
          << to_string(pr.family.kind) << "/" << to_string(pr.link) << " case " << r;
    }
  }
}

TEST(Sensitivity, EqualsTraceAtSaturatedOptimumSupport) {
  const auto model = fixtures::pcb_model();
  auto pts = fixtures::pcb_points();
  pts.resize(4);
  const auto d = saturated_aopt(model, pts);
  const Sensitivity phi(model, d);
  for (const auto& x : pts) EXPECT_NEAR(phi(x), phi.trace_inverse(), 1e-9 * phi.trace_inverse());
}

TEST(Sensitivity, WeightedSumIsTrace) {
  // sum_i w_i phi(x_i) = tr(F^{-1} F F^{-1}) = tr(F^{-1}) for any nonsingular design.
  const auto model = fixtures::paid_research_model();
  const ApproximateDesign d{fixtures::paid_research_points(), Vector::Constant(6, 1.0 / 6)};
  const Sensitivity phi(model, d);
  double s = 0.0;
  for (int i = 0; i < 6; ++i) s += d.weights[i] * phi(d.points[i]);
  EXPECT_NEAR(s, phi.trace_inverse(), 1e-12 * s);
}

TEST(Sensitivity, Errors) {
  const auto model = fixtures::pcb_model();
  auto pts = fixtures::pcb_points();
  pts.resize(3);
  EXPECT_THROW(Sensitivity(model, ApproximateDesign{pts, Vector::Constant(3, 1.0 / 3)}), SingularError);

  GlmModel m = fixtures::paid_research_model();
  const ApproximateDesign d{fixtures::paid_research_points(), Vector::Constant(6, 1.0 / 6)};
  const std::vector<int> coords{1};
  EXPECT_THROW(Sensitivity(m, d).gradient(d.points[0], coords), NonDifferentiableError);
}

// ---------------------------------------------------------------------------
// Merging and the step length
// ---------------------------------------------------------------------------

TEST(Merge, ClosePairBecomesWeightedCentroid) {
  const ApproximateDesign d{{pt({0.0}), pt({0.05}), pt({1.0})}, (Vector(3) << 0.3, 0.1, 0.6).finished()};
  const auto r = merge_points(d, 0.1);
  ASSERT_EQ(r.design.size(), 2);
  EXPECT_EQ(r.merges, 1);
  EXPECT_EQ(r.design.points[0], pt({1.0}));
  EXPECT_NEAR(r.design.points[1][0], 0.0125, 1e-15);
  EXPECT_NEAR(r.design.weights[1], 0.4, 1e-15);
  EXPECT_NEAR(r.design.weights.sum(), 1.0, 1e-15);
}

TEST(Merge, ChainsAndLeavesSeparatedPoints) {
  const ApproximateDesign d{{pt({0.0}), pt({0.08}), pt({0.16}), pt({0.5})}, Vector::Constant(4, 0.25)};
  // 0 and 0.08 merge into 0.04, which is then 0.12 from 0.16.
  const auto r = merge_points(d, 0.1);
  EXPECT_EQ(r.design.size(), 3);
  EXPECT_GE(min_pairwise_distance(r.design.points), 0.1);
  EXPECT_NEAR(r.design.weights.sum(), 1.0, 1e-15);
  const auto none = merge_points(d, 0.05);
  EXPECT_EQ(none.merges, 0);
}

TEST(Merge, RankGuardKeepsDesignNonsingular) {
  // Three points: merging the close pair would leave two points for p = 3.
  GlmModel m;
  m.predictor = PredictorBasis::main_effects(2);
  m.beta = Vector::Zero(3);
  const auto space = fixtures::box({{0, 1}, {0, 1}});
  const ApproximateDesign d{{pt({0, 0}), pt({1, 0}), pt({1, 0.05})}, Vector::Constant(3, 1.0 / 3)};
  const auto r = merge_points(m, d, 0.1, space);
  EXPECT_TRUE(r.rank_guard_fired);
  EXPECT_EQ(r.design.size(), 3);
  EXPECT_GT(h_value(m, r.design), 0.0);
}

TEST(Merge, OnlyWithinDiscreteCombination) {
  GlmModel m;
  m.predictor = PredictorBasis({term::Intercept{}, term::Linear{0}, term::Linear{1}});
  m.beta = Vector::Zero(3);
  const DesignSpace space({ContinuousFactor{0, 1}, DiscreteFactor{{0, 0.05}}});
  const ApproximateDesign d{{pt({0, 0}), pt({0, 0.05}), pt({1, 0}), pt({1, 0.05})}, Vector::Constant(4, 0.25)};
  EXPECT_EQ(merge_points(m, d, 0.1, space).merges, 0);
  EXPECT_EQ(merge_points(d, 0.1).merges, 2);
}

TEST(AlphaStep, CoefficientsMatchDirectEvaluation) {
  const auto model = fixtures::logistic_one_factor();
  const ApproximateDesign d{{pt({0.0}), pt({10.0})}, Vector::Constant(2, 0.5)};
  const Point x = pt({0.3});
  const Sensitivity phi(model, d);
  ASSERT_GT(phi(x), phi.trace_inverse());
  const auto s = alpha_step(model, d, x);
  auto mixed = [&](double a) {
    ApproximateDesign e = d;
    e.points.push_back(x);
    e.weights.conservativeResize(3);
    e.weights.head(2) *= 1.0 - a;
    e.weights[2] = a;
    return h_value(model, e);
  };
  EXPECT_NEAR(s.b_t / s.B_t, mixed(0.0), 1e-12);
  const auto [gx, gv] = oracle::grid_max(mixed, 20001);
  ASSERT_GT(s.alpha, 0.0);
  EXPECT_NEAR(s.alpha, gx, 1e-6);
  EXPECT_GE(mixed(s.alpha), gv * (1 - 1e-12));
}

TEST(AlphaStep, ZeroWhenPointDoesNotHelp) {
  const auto model = fixtures::pcb_model();
  auto pts = fixtures::pcb_points();
  pts.resize(4);
  const auto d = saturated_aopt(model, pts);
  const auto s = alpha_step(model, d, pts[0]);
  EXPECT_EQ(s.alpha, 0.0);
}

// ---------------------------------------------------------------------------
// Outer loop
// ---------------------------------------------------------------------------

namespace {

void expect_invariants(const GlmModel& model, const DesignSpace& space, const ForlionConfig& cfg,
                       const ForlionResult& r) {
  EXPECT_NEAR(r.design.weights.sum(), 1.0, 1e-12);
  EXPECT_GE(r.worst_step, -1e-12);
  for (std::size_t t = 1; t < r.trace.size(); ++t) EXPECT_GE(r.trace[t].h, r.trace[t - 1].h * (1 - 1e-12));
  if (!r.rank_guard_fired) EXPECT_GE(min_pairwise_distance(r.design.points), cfg.delta);
  for (const auto& x : r.design.points) EXPECT_TRUE(space.contains(x));
  EXPECT_TRUE(r.certified);
  const auto c = certify(model, r.design, space, 2001 / (space.num_continuous() * space.num_continuous()) + 1);
  EXPECT_LE(c.slack, 1e-4);
}

}  // namespace

TEST(Forlion, LogisticOneFactor) {
  const auto model = fixtures::logistic_one_factor();
  const auto space = fixtures::box({{0, 10}});
  const auto cfg = config_with_delta(0.3);
  const auto r = forlion_optimize(model, space, cfg);
  expect_invariants(model, space, cfg, r);
  ASSERT_EQ(r.design.size(), 2);
  const int lo = r.design.points[0][0] < r.design.points[1][0] ? 0 : 1;
  EXPECT_NEAR(r.design.points[lo][0], 0.2579, 0.05);
  EXPECT_NEAR(r.design.weights[lo], 0.8832, 0.005);
  EXPECT_GE(h_value(model, r.design) / h_value(model, fixtures::logistic_xi_o()), 0.9999);
}

TEST(Forlion, ConstrainedIntervals) {
  const auto model = fixtures::logistic_one_factor();
  const double ref = h_value(model, fixtures::logistic_xi_o());
  const std::pair<double, double> cases[] = {{7, 0.9967}, {5, 0.9520}, {3, 0.7769}, {1, 0.2495}};
  for (auto [upper, eff] : cases) {
    const auto space = fixtures::box({{0, upper}});
    const auto cfg = config_with_delta(0.3 * upper / 10.0);
    const auto r = forlion_optimize(model, space, cfg);
    expect_invariants(model, space, cfg, r);
    EXPECT_NEAR(r.h / ref, eff, 0.002) << "upper " << upper;
  }
  const auto r = forlion_optimize(model, fixtures::box({{0, 1}}), config_with_delta(0.03));
  ASSERT_EQ(r.design.size(), 2);
  const int lo = r.design.points[0][0] < r.design.points[1][0] ? 0 : 1;
  EXPECT_NEAR(r.design.points[lo][0], 0.0, 1e-9);
  EXPECT_NEAR(r.design.weights[lo], 0.6276, 0.002);
  EXPECT_NEAR(r.design.weights[1 - lo], 0.3724, 0.002);
}

TEST(Forlion, GammaVertices) {
  const auto space = fixtures::box({{0, 1}, {0, 1}});
  struct Row {
    double gamma;
    double w[4];
  };
  // Order: (0,0), (1,0), (0,1), (1,1).
  const Row rows[] = {{-0.45, {0.1136, 0.3984, 0.3983, 0.0897}},
                      {0.0, {0.3560, 0.2257, 0.2250, 0.1933}},
                      {1.0, {0.2690, 0.3003, 0.3001, 0.1307}},
                      {2.0, {0.2208, 0.3805, 0.3806, 0.0182}}};
  for (const auto& row : rows) {
    const auto model = fixtures::gamma_two_factor(row.gamma);
    const auto cfg = config_with_delta(0.1);
    const auto r = forlion_optimize(model, space, cfg);
    expect_invariants(model, space, cfg, r);
    ASSERT_EQ(r.design.size(), 4) << "gamma " << row.gamma;
    const Point vertices[] = {pt({0, 0}), pt({1, 0}), pt({0, 1}), pt({1, 1})};
    for (int v = 0; v < 4; ++v) {
      int found = -1;
      for (int i = 0; i < 4; ++i)
        if ((r.design.points[i] - vertices[v]).norm() < 1e-6) found = i;
      ASSERT_GE(found, 0) << "gamma " << row.gamma << " vertex " << v;
      EXPECT_NEAR(r.design.weights[found], row.w[v], 0.002) << "gamma " << row.gamma << " vertex " << v;
    }
  }
}

TEST(Forlion, MixedFactorsStayInSpace) {
  GlmModel m;
  m.family = Family::poisson();
  m.link = Link::Log;
  m.predictor = PredictorBasis({term::Intercept{}, term::Linear{0}, term::Linear{1}, term::Interaction{{0, 1}}});
  m.beta = Vector(4);
  m.beta << 0.5, 0.8, -0.4, 0.3;
  const DesignSpace space({ContinuousFactor{-1, 1}, DiscreteFactor{{-1, 0, 1}}});
  const auto cfg = config_with_delta(0.1);
  const auto r = forlion_optimize(m, space, cfg);
  expect_invariants(m, space, cfg, r);
}

TEST(Forlion, DeterministicAcrossThreadCounts) {
  const auto model = fixtures::gamma_two_factor(1.0);
  const auto space = fixtures::box({{0, 1}, {0, 1}});
  auto cfg = config_with_delta(0.1);
  const auto a = forlion_optimize(model, space, cfg);
  cfg.threads = 4;
  const auto b = forlion_optimize(model, space, cfg);
  ASSERT_EQ(a.design.size(), b.design.size());
  for (int i = 0; i < a.design.size(); ++i) {
    EXPECT_EQ(a.design.points[i], b.design.points[i]);
    EXPECT_EQ(a.design.weights[i], b.design.weights[i]);
  }
}

TEST(Forlion, TraceCallbackSeesEveryIteration) {
  int calls = 0;
  const auto r = forlion_optimize(fixtures::logistic_one_factor(), fixtures::box({{0, 10}}), config_with_delta(0.3),
                                  [&](const ForlionTraceRow&) { ++calls; });
  EXPECT_EQ(calls, static_cast<int>(r.trace.size()));
  EXPECT_EQ(calls, r.iterations);
}

TEST(Forlion, RejectsBadInput) {
  ForlionConfig bad;
  bad.delta = 0.0;
  EXPECT_THROW(forlion_optimize(fixtures::logistic_one_factor(), fixtures::box({{0, 1}}), bad), InvalidArgument);
  const DesignSpace finite({DiscreteFactor{{0, 1}}});
  EXPECT_THROW(forlion_optimize(fixtures::logistic_one_factor(), finite, ForlionConfig{}), InvalidArgument);
}

TEST(Certify, FlagsSuboptimalDesign) {
  const auto model = fixtures::logistic_one_factor();
  const ApproximateDesign d{{pt({0.0}), pt({10.0})}, Vector::Constant(2, 0.5)};
  const auto c = certify(model, d, fixtures::box({{0, 10}}), 1001);
  EXPECT_FALSE(c.certified);
  EXPECT_GT(c.slack, 0.01);
  EXPECT_NEAR(c.max_phi, sensitivity(model, d, c.argmax), 1e-12 * c.max_phi);
}
