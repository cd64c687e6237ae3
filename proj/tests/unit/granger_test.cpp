#include "csphhn/granger.hpp"

#include <gtest/gtest.h>

#include <boost/math/distributions/fisher_f.hpp>
#include <boost/math/special_functions/beta.hpp>
#include <cmath>
#include <random>

#include "csphhn/rng.hpp"

namespace csphhn::granger {
namespace {

Vector WhiteNoise(std::size_t n, Rng& rng, double sigma = 1.0) {
  std::normal_distribution<double> normal(0.0, sigma);
  Vector v(n);
  for (double& x : v) x = normal(rng);
  return v;
}

// y_t = a y_{t-1} + c x_{t-1} + eps.
Vector Driven(const Vector& x, double a, double c, Rng& rng) {
  std::normal_distribution<double> normal;
  Vector y(x.size(), 0.0);
  for (std::size_t t = 1; t < x.size(); ++t) y[t] = a * y[t - 1] + c * x[t - 1] + normal(rng);
  return y;
}

TEST(IncompleteBetaTest, MatchesBoost) {
  for (double a : {0.5, 1.0, 2.5, 30.0, 240.0}) {
    for (double b : {0.5, 1.0, 4.0, 60.0}) {
      for (double x : {1e-6, 0.01, 0.3, 0.5, 0.77, 0.999}) {
        const double ref = boost::math::ibeta(a, b, x);
        EXPECT_NEAR(regularized_incomplete_beta(a, b, x), ref, 1e-12 + 1e-10 * ref)
            << a << " " << b << " " << x;
      }
    }
  }
}

TEST(IncompleteBetaTest, Endpoints) {
  EXPECT_EQ(regularized_incomplete_beta(2.0, 3.0, 0.0), 0.0);
  EXPECT_EQ(regularized_incomplete_beta(2.0, 3.0, 1.0), 1.0);
  EXPECT_THROW(regularized_incomplete_beta(0.0, 3.0, 0.5), ContractViolation);
}

TEST(FSurvivalTest, MatchesBoostFisherF) {
  for (double d1 : {1.0, 2.0, 5.0}) {
    for (double d2 : {10.0, 55.0, 491.0}) {
      boost::math::fisher_f_distribution<double> dist(d1, d2);
      for (double f : {0.01, 0.5, 1.0, 3.0, 12.0, 40.0}) {
        const double ref = boost::math::cdf(boost::math::complement(dist, f));
        EXPECT_NEAR(f_survival(f, d1, d2), ref, 1e-12 + 1e-9 * ref);
      }
    }
  }
  EXPECT_EQ(f_survival(0.0, 2.0, 10.0), 1.0);
}

TEST(FitVarRestrictedTest, ConstantSeriesHasZeroResidual) {
  const Vector y(40, 3.5);
  const VarFit fit = fit_var_restricted(y, 2);
  EXPECT_EQ(fit.rss, 0.0);
  EXPECT_EQ(fit.coefficients[0], 3.5);
}

TEST(FitVarRestrictedTest, RecoversAutoregressiveCoefficient) {
  Rng rng(21);
  std::normal_distribution<double> normal;
  Vector y(500, 0.0);
  for (std::size_t t = 1; t < y.size(); ++t) y[t] = 0.9 * y[t - 1] + normal(rng);
  const VarFit fit = fit_var_restricted(y, 2);
  EXPECT_NEAR(fit.coefficients[1], 0.9, 0.1);
  EXPECT_EQ(fit.dof, 500 - 2 - 3);
}

TEST(FitVarRestrictedTest, WhiteNoiseResidualMatchesVariance) {
  Rng rng(22);
  const Vector y = WhiteNoise(500, rng, 2.0);
  const VarFit fit = fit_var_restricted(y, 2);
  EXPECT_NEAR(fit.rss / y.size(), 4.0, 0.15 * 4.0);
}

TEST(FitVarRestrictedTest, ShortSeriesThrows) {
  EXPECT_THROW(fit_var_restricted(Vector(11, 1.0), 2), SeriesTooShort);
  EXPECT_NO_THROW(fit_var_restricted(Vector(12, 1.0), 2));
}

TEST(FitVarUnrestrictedTest, IdenticalSeriesIsRankDeficient) {
  Rng rng(23);
  const Vector y = WhiteNoise(100, rng);
  EXPECT_THROW(fit_var_unrestricted(y, y, 2), RankDeficient);
}

TEST(FitVarUnrestrictedTest, DrivenSeriesReducesResidual) {
  Rng rng(24);
  const Vector x = WhiteNoise(300, rng);
  const Vector y = Driven(x, 0.0, 0.8, rng);
  EXPECT_LT(fit_var_unrestricted(y, x, 2).rss, fit_var_restricted(y, 2).rss);
}

TEST(FitVarUnrestrictedTest, IndependentSourceRarelySignificant) {
  int insignificant = 0;
  GrangerConfig cfg;
  for (int seed = 0; seed < 100; ++seed) {
    Rng rng(1000 + seed);
    const Vector x = WhiteNoise(200, rng);
    const Vector y = WhiteNoise(200, rng);
    insignificant += !granger_test(x, y, cfg).is_edge;
  }
  EXPECT_GE(insignificant, 97);
}

TEST(GrangerTest, NullEdgeRateIsCalibrated) {
  GrangerConfig cfg;
  int edges = 0;
  constexpr int kTrials = 1000;
  for (int seed = 0; seed < kTrials; ++seed) {
    Rng rng(5000 + seed);
    const Vector x = WhiteNoise(500, rng);
    const Vector y = WhiteNoise(500, rng);
    edges += granger_test(x, y, cfg).is_edge;
  }
  const double rate = static_cast<double>(edges) / kTrials;
  EXPECT_LE(rate, cfg.alpha + 2.0 * std::sqrt(cfg.alpha * (1 - cfg.alpha) / kTrials));
}

TEST(GrangerTest, PlantedEdgeDetectedInOneDirectionOnly) {
  GrangerConfig cfg;
  int forward = 0;
  int reverse = 0;
  for (int seed = 0; seed < 100; ++seed) {
    Rng rng(7000 + seed);
    const Vector x = WhiteNoise(500, rng);
    const Vector y = Driven(x, 0.0, 0.8, rng);
    forward += granger_test(x, y, cfg).is_edge;
    reverse += granger_test(y, x, cfg).is_edge;
  }
  EXPECT_GE(forward, 95);
  EXPECT_LE(reverse, 5);
}

TEST(GrangerTest, ZeroSourceIsNoEdgeWithDiagnostic) {
  Rng rng(25);
  const Vector y = WhiteNoise(100, rng);
  const TestResult r = granger_test(Vector(100, 0.0), y, GrangerConfig{});
  EXPECT_FALSE(r.is_edge);
  EXPECT_EQ(r.f_statistic, 0.0);
  EXPECT_FALSE(r.diagnostic.empty());
}

TEST(GrangerTest, ShortSeriesIsNoEdgeWithDiagnostic) {
  const TestResult r = granger_test(Vector{1, 2, 3, 4}, Vector{4, 3, 2, 1}, GrangerConfig{});
  EXPECT_FALSE(r.is_edge);
  EXPECT_NE(r.diagnostic.find("shorter"), std::string::npos);
}

TEST(GrangerTest, DeterministicCopyAtLagOne) {
  // With lag 2 the copy makes the design collinear, so the noiseless oracle
  // is posed at lag 1.
  Rng rng(26);
  const Vector x = WhiteNoise(200, rng);
  Vector y(200, 0.0);
  for (std::size_t t = 1; t < y.size(); ++t) y[t] = x[t - 1];
  GrangerConfig cfg;
  cfg.lag = 1;
  const TestResult r = granger_test(x, y, cfg);
  EXPECT_TRUE(r.is_edge);
  EXPECT_LT(r.p_value, 1e-10);
  EXPECT_TRUE(std::isfinite(r.f_statistic));
}

TEST(GrangerConfigTest, RejectsBadValues) {
  GrangerConfig cfg;
  cfg.lag = 0;
  EXPECT_THROW(cfg.validate(), ContractViolation);
  cfg.lag = 2;
  cfg.alpha = 1.0;
  EXPECT_THROW(cfg.validate(), ContractViolation);
}

TEST(InferGraphTest, IndependentNodesRarelyConnected) {
  int runs_with_at_most_one = 0;
  for (int seed = 0; seed < 100; ++seed) {
    Rng rng(9000 + seed);
    std::vector<Vector> s = {WhiteNoise(200, rng), WhiteNoise(200, rng), WhiteNoise(200, rng)};
    runs_with_at_most_one += infer_causal_graph(s, GrangerConfig{}, 1).edges.size() <= 1;
  }
  EXPECT_GE(runs_with_at_most_one, 95);
}

TEST(InferGraphTest, RecoversPlantedChain) {
  int recovered = 0;
  constexpr int kSeeds = 50;
  for (int seed = 0; seed < kSeeds; ++seed) {
    Rng rng(11000 + seed);
    const Vector a = WhiteNoise(500, rng);
    const Vector b = Driven(a, 0.1, 0.8, rng);
    const Vector c = Driven(b, 0.1, 0.8, rng);
    const CausalGraph g = infer_causal_graph({a, b, c}, GrangerConfig{}, 1);
    for (const auto& e : g.edges) {
      recovered += (e.src == 0 && e.dst == 1) || (e.src == 1 && e.dst == 2);
    }
  }
  EXPECT_GE(recovered / (2.0 * kSeeds), 0.95);
}

TEST(InferGraphTest, ResultIndependentOfThreadCount) {
  Rng rng(27);
  std::vector<Vector> s;
  for (int i = 0; i < 12; ++i) s.push_back(WhiteNoise(80, rng));
  s[5] = Driven(s[2], 0.2, 0.7, rng);
  GrangerConfig cfg;
  cfg.alpha = 0.2;
  const CausalGraph one = infer_causal_graph(s, cfg, 1);
  EXPECT_EQ(one, infer_causal_graph(s, cfg, 4));
  EXPECT_NO_THROW(one.validate(s.size()));
  EXPECT_FALSE(one.edges.empty());
}

TEST(InferGraphTest, BonferroniDividesAlpha) {
  Rng rng(28);
  std::vector<Vector> s = {WhiteNoise(60, rng), WhiteNoise(60, rng), WhiteNoise(60, rng)};
  GrangerConfig cfg;
  cfg.bonferroni = true;
  EXPECT_DOUBLE_EQ(infer_causal_graph(s, cfg, 1).alpha, 0.01 / 6.0);
}

TEST(InferGraphTest, TooFewNodesThrows) {
  Rng rng(29);
  EXPECT_THROW(infer_causal_graph({WhiteNoise(50, rng)}, GrangerConfig{}), ContractViolation);
}

TEST(CausalGraphTest, ParentsAreGroupedByTarget) {
  CausalGraph g;
  g.edges = {{0, 2, 5.0, 0.001}, {1, 2, 7.0, 0.0001}, {2, 0, 3.0, 0.005}};
  const auto parents = g.parents(3);
  ASSERT_EQ(parents[2].size(), 2u);
  EXPECT_EQ(parents[2][1].node, 1u);
  EXPECT_EQ(parents[2][1].f_statistic, 7.0);
  EXPECT_TRUE(parents[1].empty());
}

TEST(CausalGraphTest, JsonRoundTrip) {
  CausalGraph g;
  g.alpha = 0.05;
  g.lag = 3;
  g.edges = {{0, 1, 12.25, 1e-7}, {2, 0, 4.5, 0.01}};
  const std::vector<std::string> ids = {"a", "b", "c"};
  EXPECT_EQ(graph_from_json(graph_to_json(g, ids), ids), g);
  EXPECT_THROW(graph_from_json(graph_to_json(g, ids), {"a", "b"}), DanglingReference);
  EXPECT_THROW(graph_from_json("{\"alpha\":", ids), ParseError);
}

TEST(ReduceFeaturesTest, MeanAndPcaPreserveTemporalStructure) {
  Dataset ds;
  ds.dim = 2;
  ds.timesteps = 4;
  ds.classes = 2;
  for (int i = 0; i < 2; ++i) {
    NodeFeatureSeries n;
    n.id = "n" + std::to_string(i);
    n.features = Matrix::FromRows({{1, 3}, {2, 6}, {3, 9}, {4, 12}});
    ds.nodes.push_back(n);
  }
  const auto mean = reduce_features(ds, {}, FeatureReduction::kMean);
  EXPECT_EQ(mean[0], (Vector{2, 4, 6, 8}));
  // All variance lies along (1, 3)/sqrt(10); projections are centred.
  const auto pca = reduce_features(ds, {}, FeatureReduction::kPca1);
  const double unit = std::sqrt(10.0);
  for (int t = 0; t < 4; ++t) EXPECT_NEAR(pca[1][t], (t - 1.5) * unit, 1e-9);
  EXPECT_EQ(parse_reduction("mean"), FeatureReduction::kMean);
  EXPECT_THROW(parse_reduction("pca2"), ContractViolation);
}

}  // namespace
}  // namespace csphhn::granger
