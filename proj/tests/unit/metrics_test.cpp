#include "csphhn/metrics.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>
#include <random>

#include "csphhn/errors.hpp"
#include "csphhn/rng.hpp"

namespace csphhn::metrics {
namespace {

TEST(AccuracyTest, CountsMatches) {
  EXPECT_DOUBLE_EQ(accuracy(std::vector<int>{0, 1, 2, 1}, std::vector<int>{0, 1, 1, 1}), 0.75);
  EXPECT_THROW(accuracy(std::vector<int>{}, std::vector<int>{}), ContractViolation);
  EXPECT_THROW(accuracy(std::vector<int>{1}, std::vector<int>{1, 0}), ContractViolation);
}

TEST(MacroF1Test, PerfectPredictions) {
  const std::vector<int> y = {0, 1, 2, 2, 1};
  EXPECT_DOUBLE_EQ(macro_f1(y, y, 3), 1.0);
}

TEST(MacroF1Test, AllZeroPredictionsOnBalancedBinary) {
  const std::vector<int> preds = {0, 0, 0, 0};
  const std::vector<int> labels = {0, 0, 1, 1};
  EXPECT_DOUBLE_EQ(macro_f1(preds, labels, 2), 1.0 / 3.0);
  const auto per_class = per_class_f1(preds, labels, 2);
  EXPECT_DOUBLE_EQ(per_class[0], 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(per_class[1], 0.0);
}

TEST(MacroF1Test, AbsentClassScoresZero) {
  const std::vector<int> y = {0, 1, 0, 1};
  EXPECT_DOUBLE_EQ(macro_f1(y, y, 3), 2.0 / 3.0);
}

TEST(MacroF1Test, InvariantUnderClassRelabeling) {
  Rng rng(1);
  std::vector<int> preds(200);
  std::vector<int> labels(200);
  for (std::size_t i = 0; i < 200; ++i) {
    preds[i] = static_cast<int>(rng() % 4);
    labels[i] = static_cast<int>(rng() % 4);
  }
  const double base = macro_f1(preds, labels, 4);
  std::vector<int> perm = {2, 0, 3, 1};
  do {
    std::vector<int> p2;
    std::vector<int> l2;
    for (int p : preds) p2.push_back(perm[p]);
    for (int l : labels) l2.push_back(perm[l]);
    EXPECT_NEAR(macro_f1(p2, l2, 4), base, 1e-15);
  } while (std::next_permutation(perm.begin(), perm.end()));
}

TEST(AucTest, PerfectSeparation) {
  const std::vector<Vector> probs = {{0.9, 0.1}, {0.8, 0.2}, {0.3, 0.7}, {0.1, 0.9}};
  EXPECT_DOUBLE_EQ(*auc_ovr(probs, std::vector<int>{0, 0, 1, 1}, 2), 1.0);
}

TEST(AucTest, RandomScoresNearHalf) {
  Rng rng(2);
  std::uniform_real_distribution<double> u;
  std::vector<Vector> probs;
  std::vector<int> labels;
  for (int i = 0; i < 10000; ++i) {
    const double a = u(rng);
    probs.push_back({a, 1 - a});
    labels.push_back(static_cast<int>(rng() % 2));
  }
  EXPECT_NEAR(*auc_ovr(probs, labels, 2), 0.5, 0.02);
}

TEST(AucTest, AllTiedIsExactlyHalf) {
  const std::vector<Vector> probs(6, Vector{1.0 / 3, 1.0 / 3, 1.0 / 3});
  EXPECT_EQ(*auc_ovr(probs, std::vector<int>{0, 1, 2, 0, 1, 2}, 3), 0.5);
}

TEST(AucTest, DegenerateClassesSkippedOrAbsent) {
  const std::vector<Vector> probs = {{0.9, 0.1, 0.0}, {0.2, 0.8, 0.0}};
  // Class 2 has no positives and is skipped.
  EXPECT_DOUBLE_EQ(*auc_ovr(probs, std::vector<int>{0, 1}, 3), 1.0);
  EXPECT_FALSE(auc_ovr(probs, std::vector<int>{1, 1}, 3).has_value());
}

TEST(EceTest, OneHotCorrectIsZero) {
  const std::vector<Vector> probs = {{1, 0, 0}, {0, 1, 0}, {0, 0, 1}};
  EXPECT_EQ(ece(probs, std::vector<int>{0, 1, 2}), 0.0);
}

TEST(EceTest, SingleBinHandComputation) {
  std::vector<Vector> probs(10, Vector{0.9, 0.1});
  std::vector<int> labels = {0, 0, 0, 0, 0, 1, 1, 1, 1, 1};
  EXPECT_NEAR(ece(probs, labels), 0.4, 1e-15);
}

TEST(EceTest, CalibratedSamplerIsSmall) {
  Rng rng(3);
  std::gamma_distribution<double> gamma(1.0, 1.0);
  std::vector<Vector> probs;
  std::vector<int> labels;
  for (int i = 0; i < 10000; ++i) {
    Vector p(4);
    for (double& v : p) v = gamma(rng);
    const double s = std::accumulate(p.begin(), p.end(), 0.0);
    for (double& v : p) v /= s;
    std::discrete_distribution<int> draw(p.begin(), p.end());
    labels.push_back(draw(rng));
    probs.push_back(std::move(p));
  }
  EXPECT_LE(ece(probs, labels), 0.02);
}

TEST(EceTest, BoundedByOne) {
  const std::vector<Vector> probs = {{1, 0}, {0, 1}};
  EXPECT_EQ(ece(probs, std::vector<int>{1, 0}), 1.0);
}

TEST(MeanEntropyTest, UniformAndDegenerate) {
  const std::vector<Vector> probs = {{0.25, 0.25, 0.25, 0.25}, {1, 0, 0, 0}};
  EXPECT_NEAR(mean_entropy(probs), std::log(4.0) / 2.0, 1e-15);
}

TEST(ArgmaxRowsTest, FirstMaximumWins) {
  EXPECT_EQ(argmax_rows({{0.2, 0.4, 0.4}, {0.9, 0.1, 0.0}}), (std::vector<int>{1, 0}));
}

TEST(PrecisionAtKTest, AllTrueAndDisjoint) {
  const std::vector<EdgeKey> truth = {{0, 1}, {1, 2}};
  const std::vector<ScoredEdge> scored = {{0, 1, 5.0}, {1, 2, 4.0}, {2, 0, 1.0}};
  EXPECT_EQ(precision_at_k(scored, truth, 2).precision, 1.0);
  EXPECT_EQ(precision_at_k(scored, {{2, 1}, {1, 0}}, 2).precision, 0.0);
}

TEST(PrecisionAtKTest, TiesBreakBySourceThenDestination) {
  const std::vector<ScoredEdge> scored = {{3, 0, 1.0}, {1, 2, 1.0}, {1, 0, 1.0}};
  EXPECT_EQ(precision_at_k(scored, {{1, 0}}, 1).precision, 1.0);
  EXPECT_EQ(precision_at_k(scored, {{3, 0}}, 1).precision, 0.0);
}

TEST(PrecisionAtKTest, FewerCandidatesThanK) {
  const std::vector<ScoredEdge> scored = {{0, 1, 2.0}, {1, 0, 1.0}};
  const PrecisionAtK p = precision_at_k(scored, {{0, 1}}, 5);
  EXPECT_EQ(p.evaluated, 2u);
  EXPECT_DOUBLE_EQ(p.precision, 0.5);
  EXPECT_FALSE(p.diagnostic.empty());
  EXPECT_THROW(precision_at_k(scored, {{0, 1}}, 0), ContractViolation);
}

TEST(PrecisionAtKTest, RandomScoresMatchHypergeometricMean) {
  std::vector<EdgeKey> truth;
  for (std::size_t i = 0; i < 5; ++i) truth.push_back({i, i + 1});
  Rng rng(4);
  std::uniform_real_distribution<double> u;
  double total = 0.0;
  constexpr int kTrials = 10000;
  for (int t = 0; t < kTrials; ++t) {
    std::vector<ScoredEdge> scored;
    for (std::size_t i = 0; i < 20; ++i) scored.push_back({i, i + 1, u(rng)});
    total += precision_at_k(scored, truth, 5).precision;
  }
  EXPECT_NEAR(total / kTrials, 0.25, 0.02);
}

TEST(PrecisionAtKTest, InvariantUnderMonotoneTransform) {
  Rng rng(5);
  std::uniform_real_distribution<double> u(-3, 3);
  std::vector<ScoredEdge> scored;
  std::vector<EdgeKey> truth;
  for (std::size_t i = 0; i < 30; ++i) {
    scored.push_back({i, (i * 7) % 30, u(rng)});
    if (i % 3 == 0) truth.push_back({i, (i * 7) % 30});
  }
  std::vector<ScoredEdge> transformed = scored;
  for (auto& e : transformed) e.score = std::exp(2.0 * e.score) + 1.0;
  for (std::size_t k : {1, 5, 10}) {
    EXPECT_EQ(precision_at_k(scored, truth, k).precision,
              precision_at_k(transformed, truth, k).precision);
  }
}

TEST(RankCorrelationTest, IdenticalAndReversed) {
  const std::vector<double> a = {0.1, 0.5, 0.7, 2.0};
  const std::vector<double> b = {2.0, 0.7, 0.5, 0.1};
  EXPECT_DOUBLE_EQ(*rank_correlation(a, a), 1.0);
  EXPECT_DOUBLE_EQ(*rank_correlation(a, b), -1.0);
}

TEST(RankCorrelationTest, HandPairSet) {
  EXPECT_DOUBLE_EQ(*rank_correlation(std::vector<double>{1, 2, 3}, std::vector<double>{2, 1, 3}),
                   0.5);
}

TEST(RankCorrelationTest, ZeroVarianceIsUndefined) {
  EXPECT_FALSE(rank_correlation(std::vector<double>{1, 1, 1}, std::vector<double>{1, 2, 3}));
  EXPECT_THROW(rank_correlation(std::vector<double>{1}, std::vector<double>{1}),
               ContractViolation);
}

TEST(MidranksTest, TiesShareAverageRank) {
  EXPECT_EQ(midranks(std::vector<double>{10, 20, 10, 30}), (std::vector<double>{1.5, 3, 1.5, 4}));
}

TEST(CausalEdgeScoresTest, ScoresEveryOrderedPair) {
  ModelInputs inputs;
  inputs.features = Matrix(3, 1);
  inputs.parents = {{}, {}, {{0, 4.0}, {1, 1.0}}};
  ForwardTrace trace;
  trace.gamma_temp = 0.5;
  trace.causal_weights = {{}, {}, {0.8, 0.2}};
  const auto scored = causal_edge_scores(inputs, trace);
  ASSERT_EQ(scored.size(), 6u);
  for (const auto& e : scored) {
    const double expected = e.dst == 2 ? (e.src == 0 ? 2.0 : 0.5) : 0.0;
    EXPECT_EQ(e.score, expected) << e.src << "->" << e.dst;
  }
  EXPECT_EQ(precision_at_k(scored, {{0, 2}}, 1).precision, 1.0);

  const AttentionAlignment a = causal_attention_alignment(inputs, trace);
  EXPECT_EQ(a.model, (std::vector<double>{0.8, 0.2}));
  EXPECT_NEAR(a.reference[0], std::exp(4.0) / (std::exp(4.0) + std::exp(1.0)), 1e-15);
}

TEST(ClassificationReportTest, UsesOnlyListedNodes) {
  const std::vector<Vector> probs = {{0.9, 0.1}, {0.2, 0.8}, {0.6, 0.4}};
  const std::vector<int> labels = {0, 1, 1};
  const std::vector<std::size_t> nodes = {0, 1};
  const EvalReport r = classification_report(probs, labels, nodes, 2);
  EXPECT_EQ(r.evaluated_nodes, 2u);
  EXPECT_EQ(r.accuracy, 1.0);
  EXPECT_EQ(r.macro_f1, 1.0);
  EXPECT_EQ(*r.auc, 1.0);
  EXPECT_EQ(r.ece_bins, kDefaultEceBins);
  EXPECT_NEAR(r.ece, 0.15, 1e-15);
  EXPECT_GE(r.mean_entropy, 0.0);
}

}  // namespace
}  // namespace csphhn::metrics
