#include "csphhn/hypergraph.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <set>

#include "csphhn/errors.hpp"
#include "csphhn/io.hpp"
#include "test_util.hpp"

namespace csphhn {
namespace {

using testing::RandomDataset;
using testing::TempDir;

constexpr const char* kMinimal = R"({
  "dim": 2, "timesteps": 3, "classes": 2, "horizon": 1,
  "nodes": [
    {"id": "a", "features": [[1, 2], [3, 4], [5, 6]]},
    {"id": "b", "features": [[0, 0], [0.5, -1], [2, 2]]}
  ],
  "hyperedges": [{"id": "e", "members": ["a", "b"], "type": "family"}],
  "labels": {"a": 0, "b": 1},
  "splits": {"train": ["a"], "val": [], "test": ["b"]}
})";

TEST(BuildIndexTest, SingleEdge) {
  const Dataset ds = dataset_from_json(kMinimal);
  const IncidenceIndex index = build_index(ds);
  EXPECT_EQ(index.node_edges[0], std::vector<std::size_t>{0});
  EXPECT_EQ(index.node_edges[1], std::vector<std::size_t>{0});
  EXPECT_EQ(index.edge_nodes[0], (std::vector<std::size_t>{0, 1}));
}

TEST(BuildIndexTest, IsolatedNodeHasEmptyAdjacency) {
  Dataset ds = RandomDataset(1);
  ds.hyperedges = {{"only", {0, 1}, "t"}};
  const IncidenceIndex index = build_index(ds);
  EXPECT_TRUE(index.node_edges[5].empty());
}

TEST(BuildIndexTest, RoundTripMatchesBruteForceMembership) {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const Dataset ds = RandomDataset(seed, 15, 10);
    const IncidenceIndex index = build_index(ds);
    for (std::size_t v = 0; v < ds.node_count(); ++v) {
      std::vector<std::size_t> expected;
      for (std::size_t e = 0; e < ds.hyperedges.size(); ++e) {
        const auto& m = ds.hyperedges[e].members;
        if (std::find(m.begin(), m.end(), v) != m.end()) expected.push_back(e);
      }
      ASSERT_EQ(index.node_edges[v], expected) << "seed " << seed;
    }
    for (std::size_t e = 0; e < ds.hyperedges.size(); ++e) {
      std::set<std::size_t> back;
      for (std::size_t v = 0; v < ds.node_count(); ++v) {
        const auto& adj = index.node_edges[v];
        if (std::find(adj.begin(), adj.end(), e) != adj.end()) back.insert(v);
      }
      const auto& m = ds.hyperedges[e].members;
      ASSERT_EQ(back, std::set<std::size_t>(m.begin(), m.end()));
    }
  }
}

TEST(BuildIndexTest, DanglingMemberThrows) {
  Dataset ds = RandomDataset(2);
  ds.hyperedges[0].members.push_back(99);
  EXPECT_THROW(build_index(ds), DanglingReference);
  EXPECT_THROW(ds.validate(), DanglingReference);
}

TEST(DatasetJsonTest, MinimalFileLoads) {
  const Dataset ds = dataset_from_json(kMinimal);
  EXPECT_EQ(ds.node_count(), 2u);
  EXPECT_EQ(ds.nodes[0].features(2, 1), 6.0);
  EXPECT_EQ(ds.labels, (std::vector<int>{0, 1}));
  EXPECT_EQ(ds.context_types(), std::vector<std::string>{"family"});
}

TEST(DatasetJsonTest, DuplicateMemberIsValidationError) {
  std::string text = kMinimal;
  text.replace(text.find(R"(["a", "b"])"), 10, R"(["a", "a"])");
  EXPECT_THROW(dataset_from_json(text), ValidationError);
}

TEST(DatasetJsonTest, SchemaErrorsNameTheField) {
  std::string text = kMinimal;
  text.replace(text.find("[0.5, -1]"), 9, "[0.5]");
  try {
    dataset_from_json(text);
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("$.nodes[1].features[1]"), std::string::npos);
  }
  try {
    dataset_from_json("{\n\"dim\": 2,\n oops }");
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos);
  }
}

TEST(DatasetJsonTest, InvariantViolationsAreValidationErrors) {
  std::string overlapping = kMinimal;
  overlapping.replace(overlapping.find(R"("val": [])"), 9, R"("val": ["a"])");
  EXPECT_THROW(dataset_from_json(overlapping), ValidationError);

  std::string bad_label = kMinimal;
  bad_label.replace(bad_label.find(R"("b": 1)"), 6, R"("b": 2)");
  EXPECT_THROW(dataset_from_json(bad_label), ValidationError);

  std::string one_class = kMinimal;
  one_class.replace(one_class.find(R"("classes": 2)"), 12, R"("classes": 1)");
  EXPECT_THROW(dataset_from_json(one_class), ValidationError);

  std::string unknown = kMinimal;
  unknown.replace(unknown.find(R"("test": ["b"])"), 13, R"("test": ["z"])");
  EXPECT_THROW(dataset_from_json(unknown), DanglingReference);
}

TEST(DatasetJsonTest, SaveLoadRoundTripIsStructurallyEqual) {
  TempDir dir;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Dataset ds = RandomDataset(seed);
    save_dataset(ds, dir / "ds.json");
    EXPECT_EQ(load_dataset(dir / "ds.json"), ds);
  }
}

TEST(DatasetJsonTest, MissingFileIsIoError) {
  EXPECT_THROW(load_dataset("/nonexistent/dataset.json"), IoError);
}

TEST(FeatureDropoutTest, RateZeroIsIdentity) {
  const Dataset ds = RandomDataset(3);
  Rng rng(1);
  EXPECT_EQ(feature_dropout(ds, 0.0, rng), ds);
}

TEST(FeatureDropoutTest, ZeroedFractionConcentrates) {
  // 100 nodes x 10 steps x 10 features = 1e4 entries; the binomial standard
  // deviation of the fraction is about 0.005.
  const Dataset ds = RandomDataset(4, 100, 10, 10, 10);
  Rng rng(2);
  const Dataset out = feature_dropout(ds, 0.4, rng);
  std::size_t zeros = 0;
  std::size_t total = 0;
  for (const auto& n : out.nodes) {
    for (double x : n.features.data()) {
      zeros += x == 0.0;
      ++total;
    }
  }
  EXPECT_EQ(total, 10000u);
  EXPECT_NEAR(static_cast<double>(zeros) / total, 0.4, 0.02);
  EXPECT_EQ(out.labels, ds.labels);
  EXPECT_EQ(out.hyperedges, ds.hyperedges);
  EXPECT_EQ(out.splits, ds.splits);
}

TEST(FeatureDropoutTest, SameSeedIsByteReproducible) {
  const Dataset ds = RandomDataset(5);
  Rng a(9);
  Rng b(9);
  EXPECT_EQ(dataset_to_json(feature_dropout(ds, 0.3, a)),
            dataset_to_json(feature_dropout(ds, 0.3, b)));
}

TEST(FeatureDropoutTest, RateOutOfRangeThrows) {
  const Dataset ds = RandomDataset(6);
  Rng rng(1);
  EXPECT_THROW(feature_dropout(ds, 1.0, rng), ContractViolation);
  EXPECT_THROW(feature_dropout(ds, -0.1, rng), ContractViolation);
}

TEST(ExpandToPairwiseTest, ReplacesEdgesByCliques) {
  Dataset ds = RandomDataset(7);
  ds.hyperedges = {{"big", {0, 1, 2, 3}, "t0"}, {"pair", {4, 5}, "t1"}};
  const Dataset out = expand_to_pairwise(ds);
  ASSERT_EQ(out.hyperedges.size(), 7u);
  for (const auto& e : out.hyperedges) EXPECT_EQ(e.members.size(), 2u);
  EXPECT_EQ(out.hyperedges.back().context_type, "t1");
  EXPECT_NO_THROW(out.validate());
  // Both variants see the same context types.
  EXPECT_EQ(out.context_types(), ds.context_types());
}

TEST(DatasetDigestTest, SensitiveToContent) {
  Dataset ds = RandomDataset(8);
  const std::string before = dataset_digest(ds);
  EXPECT_EQ(before, dataset_digest(RandomDataset(8)));
  ds.nodes[0].features(0, 0) += 1e-12;
  EXPECT_NE(before, dataset_digest(ds));
}

}  // namespace
}  // namespace csphhn
