#include "csphhn/checkpoint.hpp"

#include <gtest/gtest.h>

#include <random>

#include "csphhn/errors.hpp"
#include "csphhn/io.hpp"
#include "json.hpp"
#include "test_util.hpp"

namespace csphhn {
namespace {

Checkpoint SampleCheckpoint(bool with_graph) {
  Checkpoint c;
  c.model.input_dim = 3;
  c.model.embed_dim = 4;
  c.model.classes = 2;
  c.model.context_types = 2;
  c.model.layers = 1;
  c.train.lambda1 = 0.05;
  c.train.seed = 42;
  Rng rng(3);
  c.params = ModelParams::Init(c.model, rng);
  std::normal_distribution<double> normal;
  c.params.for_each([&](std::string_view, std::span<double> s) {
    for (double& x : s) x += 1e-3 * normal(rng);
  });
  c.context_types = {"a", "b"};
  c.node_ids = {"n0", "n1", "n2"};
  if (with_graph) {
    granger::CausalGraph g;
    g.edges = {{0, 2, 17.25, 1e-9}};
    c.graph = g;
  }
  c.best_epoch = 7;
  c.best_val_loss = 0.123456789012345;
  c.dataset_digest = "abcdef0123456789";
  return c;
}

TEST(CheckpointTest, JsonRoundTripIsExact) {
  for (bool with_graph : {false, true}) {
    const Checkpoint c = SampleCheckpoint(with_graph);
    EXPECT_EQ(checkpoint_from_json(checkpoint_to_json(c)), c);
  }
}

TEST(CheckpointTest, FileRoundTrip) {
  testing::TempDir dir;
  const Checkpoint c = SampleCheckpoint(true);
  save_checkpoint(c, dir / "ckpt.json");
  EXPECT_EQ(load_checkpoint(dir / "ckpt.json"), c);
}

TEST(CheckpointTest, DocumentCarriesVersionAndDigest) {
  const Checkpoint c = SampleCheckpoint(false);
  const auto doc = nlohmann::json::parse(checkpoint_to_json(c));
  EXPECT_EQ(doc["version"], kCheckpointVersion);
  EXPECT_EQ(doc["config_digest"], config_digest(c.model, c.train));
  EXPECT_TRUE(doc["causal_graph"].is_null());
  EXPECT_EQ(doc["train"]["adam"]["beta2"], 0.999);
}

TEST(CheckpointTest, DigestMismatchIsValidationError) {
  auto doc = nlohmann::json::parse(checkpoint_to_json(SampleCheckpoint(false)));
  doc["model"]["layers"] = 2;
  EXPECT_THROW(checkpoint_from_json(doc.dump()), ValidationError);
}

TEST(CheckpointTest, ShapeMismatchIsValidationError) {
  auto doc = nlohmann::json::parse(checkpoint_to_json(SampleCheckpoint(false)));
  doc["params"][0]["values"].erase(0);
  EXPECT_THROW(checkpoint_from_json(doc.dump()), ValidationError);
}

TEST(CheckpointTest, MalformedDocumentsAreParseErrors) {
  EXPECT_THROW(checkpoint_from_json("not json"), ParseError);
  EXPECT_THROW(checkpoint_from_json(R"({"format":"something-else"})"), ParseError);
  auto doc = nlohmann::json::parse(checkpoint_to_json(SampleCheckpoint(false)));
  doc["version"] = kCheckpointVersion + 1;
  EXPECT_THROW(checkpoint_from_json(doc.dump()), ParseError);
}

TEST(ConfigDigestTest, SensitiveToEveryAblationSwitch) {
  const Checkpoint c = SampleCheckpoint(false);
  const std::string base = config_digest(c.model, c.train);
  for (int flag = 0; flag < 3; ++flag) {
    ModelConfig m = c.model;
    if (flag == 0) m.euclidean = true;
    if (flag == 1) m.pairwise = true;
    if (flag == 2) m.use_causal = false;
    EXPECT_NE(config_digest(m, c.train), base);
  }
  TrainConfig t = c.train;
  t.lambda1 = 0.0;
  EXPECT_NE(config_digest(c.model, t), base);
}

}  // namespace
}  // namespace csphhn
