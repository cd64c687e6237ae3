#include "cli.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <chrono>
#include <sstream>

#include "csphhn/checkpoint.hpp"
#include "csphhn/hypergraph.hpp"
#include "csphhn/io.hpp"
#include "json.hpp"
#include "test_util.hpp"

namespace csphhn::cli {
namespace {

using nlohmann::json;
using testing::TempDir;

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result RunCli(const std::vector<std::string>& args) {
  std::ostringstream out;
  std::ostringstream err;
  const int code = run(args, out, err);
  return {code, out.str(), err.str()};
}

json ReadJson(const std::filesystem::path& path) { return json::parse(read_text_file(path)); }

// Shared toy artifacts: synth -> granger -> a short training run.
class CliPipelineTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = new TempDir();
    const std::string d = dir_->path().string();
    ASSERT_EQ(RunCli({"synth", "--preset", "toy", "--out", d}).code, kSuccess);
    ASSERT_EQ(RunCli({"granger", "--dataset", d + "/dataset.json", "--out", d}).code, kSuccess);
    ASSERT_EQ(RunCli({"train", "--dataset", d + "/dataset.json", "--graph", d + "/graph.json",
                   "--epochs", "3", "--embed-dim", "8", "--out", d})
                  .code,
              kSuccess);
  }
  static void TearDownTestSuite() {
    delete dir_;
    dir_ = nullptr;
  }
  static std::string Path(const std::string& leaf) { return (dir_->path() / leaf).string(); }

  static TempDir* dir_;
};

TempDir* CliPipelineTest::dir_ = nullptr;

TEST(CliTest, NoSubcommandIsUsageError) {
  EXPECT_EQ(RunCli({}).code, kUsageError);
  EXPECT_EQ(RunCli({"frobnicate"}).code, kUsageError);
}

TEST(CliTest, HelpSucceeds) {
  const Result r = RunCli({"--help"});
  EXPECT_EQ(r.code, kSuccess);
  EXPECT_NE(r.out.find("gradcheck"), std::string::npos);
}

TEST(CliTest, MissingRequiredFlagsAreUsageErrors) {
  EXPECT_EQ(RunCli({"synth", "--preset", "toy"}).code, kUsageError);
  EXPECT_EQ(RunCli({"granger", "--out", "/tmp"}).code, kUsageError);
  EXPECT_EQ(RunCli({"eval", "--out", "/tmp"}).code, kUsageError);
}

TEST(CliTest, MissingInputFileIsInputError) {
  TempDir dir;
  EXPECT_EQ(RunCli({"granger", "--dataset", "/nonexistent.json", "--out", dir.path().string()}).code,
            kInputError);
}

TEST(CliTest, UnknownPresetIsUsageError) {
  TempDir dir;
  EXPECT_EQ(RunCli({"synth", "--preset", "huge", "--out", dir.path().string()}).code, kUsageError);
}

TEST(CliTest, GradcheckPassesAndCorruptionFails) {
  TempDir dir;
  const Result ok = RunCli({"gradcheck", "--seed", "1", "--out", dir.path().string()});
  EXPECT_EQ(ok.code, kSuccess);
  const json report = ReadJson(dir / "gradcheck.json");
  EXPECT_LE(report["max_rel_error"].get<double>(), 1e-4);
  EXPECT_TRUE(std::filesystem::exists(dir / "gradcheck_manifest.json"));

  const Result bad = RunCli({"gradcheck", "--corrupt-gradient", "head_w"});
  EXPECT_EQ(bad.code, kGradcheckFailed);
  EXPECT_NE(bad.err.find("head_w"), std::string::npos);
}

TEST(CliTest, SynthIsDeterministic) {
  TempDir a;
  TempDir b;
  for (const auto* d : {&a, &b}) {
    ASSERT_EQ(RunCli({"synth", "--preset", "toy", "--seed", "5", "--out", d->path().string()}).code,
              kSuccess);
  }
  EXPECT_EQ(file_digest(a / "dataset.json"), file_digest(b / "dataset.json"));
  EXPECT_EQ(file_digest(a / "truth.json"), file_digest(b / "truth.json"));
  const json manifest = ReadJson(a / "manifest.json");
  EXPECT_EQ(manifest["command"], "synth");
  EXPECT_EQ(manifest["seed"], 5);
  EXPECT_EQ(manifest["outputs"][0]["digest"], file_digest(a / "dataset.json"));
}

TEST(CliTest, SynthConfigFileOverridesPreset) {
  TempDir dir;
  write_text_file_atomic(dir / "cfg.json",
                         R"({"preset": "toy", "n_nodes": 30, "n_hyperedges": 20})");
  ASSERT_EQ(RunCli({"synth", "--config", (dir / "cfg.json").string(), "--out", dir.path().string()})
                .code,
            kSuccess);
  const Dataset ds = load_dataset(dir / "dataset.json");
  EXPECT_EQ(ds.node_count(), 30u);
  EXPECT_EQ(ds.hyperedges.size(), 20u);
}

TEST_F(CliPipelineTest, GrangerRejectsBadArguments) {
  TempDir out;
  const std::string ds = Path("dataset.json");
  EXPECT_EQ(RunCli({"granger", "--dataset", ds, "--lag", "0", "--out", out.path().string()}).code,
            kUsageError);
  EXPECT_EQ(RunCli({"granger", "--dataset", ds, "--alpha", "1.5", "--out", out.path().string()}).code,
            kUsageError);
  EXPECT_EQ(
      RunCli({"granger", "--dataset", ds, "--reduction", "pca7", "--out", out.path().string()}).code,
      kUsageError);
}

TEST_F(CliPipelineTest, GrangerGraphIsThreadIndependent) {
  TempDir out;
  ASSERT_EQ(RunCli({"granger", "--dataset", Path("dataset.json"), "--threads", "3", "--out",
                 out.path().string()})
                .code,
            kSuccess);
  EXPECT_EQ(file_digest(out / "graph.json"), file_digest(Path("graph.json")));
  const json graph = ReadJson(out / "graph.json");
  EXPECT_EQ(graph["lag"], 2);
  EXPECT_EQ(graph["alpha"], 0.01);
}

TEST_F(CliPipelineTest, TrainWritesArtifacts) {
  const Checkpoint ckpt = load_checkpoint(Path("checkpoint.json"));
  EXPECT_EQ(ckpt.model.embed_dim, 8u);
  EXPECT_TRUE(ckpt.graph.has_value());
  const std::string csv = read_text_file(Path("history.csv"));
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 4);
  const json manifest = ReadJson(Path("train_manifest.json"));
  EXPECT_EQ(manifest["command"], "train");
  EXPECT_EQ(manifest["config"]["epochs"], 3);
}

TEST_F(CliPipelineTest, TrainNeedsGraphUnlessNoCausal) {
  TempDir out;
  EXPECT_EQ(RunCli({"train", "--dataset", Path("dataset.json"), "--out", out.path().string()}).code,
            kUsageError);
  EXPECT_EQ(RunCli({"train", "--dataset", Path("dataset.json"), "--no-causal", "--epochs", "1",
                 "--out", out.path().string()})
                .code,
            kSuccess);
  EXPECT_FALSE(load_checkpoint(out / "checkpoint.json").graph.has_value());
}

TEST_F(CliPipelineTest, TrainConfigFileAppliesAndValidatesKeys) {
  TempDir out;
  write_text_file_atomic(out / "cfg.json", R"({"epochs": 2, "embed_dim": 6, "no_causal": true})");
  ASSERT_EQ(RunCli({"train", "--dataset", Path("dataset.json"), "--config",
                 (out / "cfg.json").string(), "--embed-dim", "5", "--out", out.path().string()})
                .code,
            kSuccess);
  const Checkpoint ckpt = load_checkpoint(out / "checkpoint.json");
  EXPECT_EQ(ckpt.model.embed_dim, 5u);  // the command line wins
  EXPECT_EQ(ckpt.train.max_epochs, 2u);
  EXPECT_FALSE(ckpt.model.use_causal);

  write_text_file_atomic(out / "bad.json", R"({"epoch": 2})");
  EXPECT_EQ(RunCli({"train", "--dataset", Path("dataset.json"), "--config",
                 (out / "bad.json").string(), "--out", out.path().string()})
                .code,
            kInputError);
}

TEST_F(CliPipelineTest, TrainIsDeterministic) {
  TempDir out;
  ASSERT_EQ(RunCli({"train", "--dataset", Path("dataset.json"), "--graph", Path("graph.json"),
                 "--epochs", "3", "--embed-dim", "8", "--out", out.path().string()})
                .code,
            kSuccess);
  EXPECT_EQ(file_digest(out / "checkpoint.json"), file_digest(Path("checkpoint.json")));
  const json a = ReadJson(out / "train_manifest.json");
  const json b = ReadJson(Path("train_manifest.json"));
  EXPECT_EQ(a["outputs"][1]["digest"], b["outputs"][1]["digest"]);
  EXPECT_EQ(a["outputs"][1]["digest_excludes"], "wallclock_ms");
}

TEST_F(CliPipelineTest, EvalReportSchema) {
  TempDir out;
  ASSERT_EQ(RunCli({"eval", "--checkpoint", Path("checkpoint.json"), "--dataset",
                 Path("dataset.json"), "--truth", Path("truth.json"), "--k", "3", "--k", "5",
                 "--out", out.path().string()})
                .code,
            kSuccess);
  const json r = ReadJson(out / "report.json");
  for (const char* key : {"accuracy", "macro_f1", "auc", "ece", "mean_entropy", "p_at_k",
                          "spearman", "per_class_f1"}) {
    EXPECT_TRUE(r["metrics"].contains(key)) << key;
  }
  EXPECT_TRUE(r["metrics"]["p_at_k"].contains("3"));
  EXPECT_TRUE(r["metrics"]["p_at_k"].contains("5"));
  EXPECT_EQ(r["config"]["ece_bins"], 10);
  EXPECT_EQ(r["config"]["split"], "test");
  EXPECT_EQ(r["dataset_digest"], dataset_digest(load_dataset(Path("dataset.json"))));
  const double acc = r["metrics"]["accuracy"];
  EXPECT_TRUE(acc >= 0.0 && acc <= 1.0);
}

TEST_F(CliPipelineTest, EvalWithFeatureDropoutIsSeeded) {
  TempDir a;
  TempDir b;
  for (const auto* d : {&a, &b}) {
    ASSERT_EQ(RunCli({"eval", "--checkpoint", Path("checkpoint.json"), "--dataset",
                   Path("dataset.json"), "--dropout-rate", "0.4", "--seed", "3", "--split", "all",
                   "--out", d->path().string()})
                  .code,
              kSuccess);
  }
  EXPECT_EQ(file_digest(a / "report.json"), file_digest(b / "report.json"));
  EXPECT_EQ(ReadJson(a / "report.json")["evaluated_nodes"], 40);
}

TEST_F(CliPipelineTest, EvalRejectsMismatchedDataset) {
  TempDir other;
  ASSERT_EQ(RunCli({"synth", "--preset", "small", "--out", other.path().string()}).code, kSuccess);
  EXPECT_EQ(RunCli({"eval", "--checkpoint", Path("checkpoint.json"), "--dataset",
                 (other / "dataset.json").string(), "--out", other.path().string()})
                .code,
            kInputError);
}

TEST_F(CliPipelineTest, GrangerEdgeFileContainsPlantedEdges) {
  const json truth = ReadJson(Path("truth.json"));
  const json graph = ReadJson(Path("graph.json"));
  ASSERT_FALSE(truth["true_edges"].empty());
  for (const auto& t : truth["true_edges"]) {
    bool found = false;
    for (const auto& e : graph["edges"]) found = found || (e["src"] == t["src"] && e["dst"] == t["dst"]);
    EXPECT_TRUE(found) << t.dump();
  }
}

TEST(CliTest, TinyAlphaOnNullDataGivesNoEdges) {
  TempDir dir;
  write_text_file_atomic(dir / "cfg.json", R"({"preset": "toy", "n_planted": 0})");
  ASSERT_EQ(RunCli({"synth", "--config", (dir / "cfg.json").string(), "--out", dir.path().string()})
                .code,
            kSuccess);
  ASSERT_EQ(RunCli({"granger", "--dataset", (dir / "dataset.json").string(), "--alpha", "1e-9",
                    "--out", dir.path().string()})
                .code,
            kSuccess);
  EXPECT_TRUE(ReadJson(dir / "graph.json")["edges"].empty());
}

TEST_F(CliPipelineTest, DefaultTrainingOnToyFitsBudget) {
  TempDir out;
  const auto start = std::chrono::steady_clock::now();
  ASSERT_EQ(RunCli({"train", "--dataset", Path("dataset.json"), "--graph", Path("graph.json"),
                    "--out", out.path().string()})
                .code,
            kSuccess);
  EXPECT_LT(std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count(), 60.0);
  const std::string csv = read_text_file(out / "history.csv");
  EXPECT_LE(std::count(csv.begin(), csv.end(), '\n'), 101);
}

TEST_F(CliPipelineTest, ZeroDropoutRateEqualsNoFlag) {
  TempDir a;
  TempDir b;
  const std::vector<std::string> base = {"eval", "--checkpoint", Path("checkpoint.json"),
                                         "--dataset", Path("dataset.json")};
  auto with = base;
  with.insert(with.end(), {"--out", a.path().string()});
  auto zero = base;
  zero.insert(zero.end(), {"--dropout-rate", "0", "--out", b.path().string()});
  ASSERT_EQ(RunCli(with).code, kSuccess);
  ASSERT_EQ(RunCli(zero).code, kSuccess);
  EXPECT_EQ(ReadJson(a / "report.json")["metrics"], ReadJson(b / "report.json")["metrics"]);
}

}  // namespace
}  // namespace csphhn::cli
