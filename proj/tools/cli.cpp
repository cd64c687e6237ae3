#include "cli.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <optional>
#include <set>

#include "CLI11.hpp"
#include "csphhn/checkpoint.hpp"
#include "csphhn/errors.hpp"
#include "csphhn/gradcheck.hpp"
#include "csphhn/granger.hpp"
#include "csphhn/hypergraph.hpp"
#include "csphhn/io.hpp"
#include "csphhn/metrics.hpp"
#include "csphhn/model.hpp"
#include "csphhn/synthgen.hpp"
#include "csphhn/training.hpp"
#include "json.hpp"

namespace csphhn::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

constexpr const char* kVersion = "0.1.0";

// Raised for flag combinations CLI11 cannot express; maps to exit code 2.
class UsageError : public Error {
 public:
  using Error::Error;
};

struct Common {
  std::uint64_t seed = 0;
  std::string out;
  std::string config;
};

void AddCommon(CLI::App* cmd, Common& c) {
  cmd->add_option("--seed", c.seed, "Seed for every random stream")
      ->capture_default_str();
  cmd->add_option("--out", c.out, "Output directory");
  cmd->add_option("--config", c.config,
                  "JSON object whose keys set options not given on the command line");
}

std::string ScalarText(const json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
  if (v.is_number()) return v.dump();
  throw ParseError("config: values must be scalars, got " + v.dump());
}

json ReadJsonFile(const std::string& path, const std::string& what) {
  try {
    return json::parse(read_text_file(path));
  } catch (const json::parse_error& e) {
    throw ParseError(what + " " + path + ": " + e.what());
  }
}

// Feeds --config keys into options that were not given explicitly.
void ApplyConfig(CLI::App* cmd, const json& cfg) {
  if (!cfg.is_object()) throw ParseError("config: top level must be an object");
  for (const auto& [key, value] : cfg.items()) {
    std::string name = key;
    std::replace(name.begin(), name.end(), '_', '-');
    if (name == "config") throw ParseError("config: 'config' cannot be nested");
    CLI::Option* opt = cmd->get_option_no_throw("--" + name);
    if (opt == nullptr) {
      throw ParseError("config: unknown key '" + key + "' for command " + cmd->get_name());
    }
    if (opt->count() > 0) continue;
    if (value.is_array()) {
      for (const auto& item : value) opt->add_result(ScalarText(item));
    } else {
      opt->add_result(ScalarText(value));
    }
    opt->run_callback();
  }
}

void RequireFlag(bool present, const std::string& flag, const std::string& cmd) {
  if (!present) throw UsageError(cmd + ": " + flag + " is required");
}

json FileEntry(const fs::path& path) {
  return {{"path", path.string()}, {"digest", file_digest(path)}};
}

struct Manifest {
  std::string command;
  std::vector<std::string> args;
  std::uint64_t seed = 0;
  json config = json::object();
  json inputs = json::array();
  json outputs = json::array();
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();

  void write(const fs::path& path) {
    const double ms = std::chrono::duration<double, std::milli>(
                          std::chrono::steady_clock::now() - start)
                          .count();
    outputs.push_back({{"path", path.string()}, {"digest", nullptr}});
    json doc = {{"command", command},
                {"args", args},
                {"seed", seed},
                {"config", config},
                {"config_digest", hex_digest(fnv1a64(config.dump()))},
                {"inputs", inputs},
                {"outputs", outputs},
                {"versions", {{"csphhn", kVersion}, {"checkpoint", kCheckpointVersion}}},
                {"wallclock_ms", ms}};
    write_text_file_atomic(path, doc.dump(1) + "\n");
  }
};

// ---------------------------------------------------------------- synth

json SynthConfigJson(const synth::SynthConfig& c) {
  json planted = json::array();
  for (const auto& e : c.planted) {
    planted.push_back({{"src", e.src}, {"dst", e.dst}, {"coef", e.coef}});
  }
  return {{"n_nodes", c.n_nodes},
          {"n_hyperedges", c.n_hyperedges},
          {"mean_edge_size", c.mean_edge_size},
          {"dim", c.dim},
          {"timesteps", c.timesteps},
          {"classes", c.classes},
          {"horizon", c.horizon},
          {"communities", c.communities},
          {"context_types", c.context_types},
          {"community_mixing", c.community_mixing},
          {"self_coef", c.self_coef},
          {"noise_sigma", c.noise_sigma},
          {"signal_strength", c.signal_strength},
          {"baseline_offset", c.baseline_offset},
          {"prototype_jitter", c.prototype_jitter},
          {"label_noise", c.label_noise},
          {"planted", planted},
          {"n_planted", c.n_planted},
          {"planted_coef", c.planted_coef},
          {"peripheral_targets", c.peripheral_targets},
          {"train_fraction", c.train_fraction},
          {"val_fraction", c.val_fraction},
          {"burn_in", c.burn_in},
          {"seed", c.seed}};
}

synth::SynthConfig SynthConfigFromJson(const json& j, synth::SynthConfig c) {
  if (!j.is_object()) throw ParseError("synth config: top level must be an object");
  try {
    for (const auto& [key, v] : j.items()) {
      if (key == "n_nodes") c.n_nodes = v.get<std::size_t>();
      else if (key == "n_hyperedges") c.n_hyperedges = v.get<std::size_t>();
      else if (key == "mean_edge_size") c.mean_edge_size = v.get<double>();
      else if (key == "dim") c.dim = v.get<std::size_t>();
      else if (key == "timesteps") c.timesteps = v.get<std::size_t>();
      else if (key == "classes") c.classes = v.get<std::size_t>();
      else if (key == "horizon") c.horizon = v.get<std::size_t>();
      else if (key == "communities") c.communities = v.get<std::size_t>();
      else if (key == "context_types") c.context_types = v.get<std::size_t>();
      else if (key == "community_mixing") c.community_mixing = v.get<double>();
      else if (key == "self_coef") c.self_coef = v.get<double>();
      else if (key == "noise_sigma") c.noise_sigma = v.get<double>();
      else if (key == "signal_strength") c.signal_strength = v.get<double>();
      else if (key == "baseline_offset") c.baseline_offset = v.get<double>();
      else if (key == "prototype_jitter") c.prototype_jitter = v.get<double>();
      else if (key == "label_noise") c.label_noise = v.get<double>();
      else if (key == "n_planted") c.n_planted = v.get<std::size_t>();
      else if (key == "planted_coef") c.planted_coef = v.get<double>();
      else if (key == "peripheral_targets") c.peripheral_targets = v.get<bool>();
      else if (key == "train_fraction") c.train_fraction = v.get<double>();
      else if (key == "val_fraction") c.val_fraction = v.get<double>();
      else if (key == "burn_in") c.burn_in = v.get<std::size_t>();
      else if (key == "seed") c.seed = v.get<std::uint64_t>();
      else if (key == "preset") continue;
      else if (key == "planted") {
        c.planted.clear();
        for (const auto& e : v) {
          c.planted.push_back({e.at("src").get<std::size_t>(),
                               e.at("dst").get<std::size_t>(),
                               e.at("coef").get<double>()});
        }
      } else {
        throw ParseError("synth config: unknown key '" + key + "'");
      }
    }
  } catch (const json::exception& e) {
    throw ParseError(std::string("synth config: ") + e.what());
  }
  return c;
}

struct SynthArgs {
  Common common;
  std::string preset;
};

int RunSynth(CLI::App* cmd, const SynthArgs& a, const std::vector<std::string>& args,
             std::ostream& out) {
  RequireFlag(!a.common.out.empty(), "--out", "synth");
  synth::SynthConfig cfg;
  json file_cfg = json::object();
  if (!a.common.config.empty()) file_cfg = ReadJsonFile(a.common.config, "config");
  std::string preset_name = a.preset;
  if (preset_name.empty() && file_cfg.is_object() && file_cfg.contains("preset")) {
    preset_name = file_cfg.at("preset").get<std::string>();
  }
  if (preset_name.empty() && a.common.config.empty()) preset_name = "toy";
  if (!preset_name.empty()) {
    try {
      cfg = synth::preset(preset_name);
    } catch (const ContractViolation& e) {
      throw UsageError(std::string("synth: ") + e.what());
    }
  }
  cfg = SynthConfigFromJson(file_cfg, cfg);
  if (cmd->get_option("--seed")->count() > 0) cfg.seed = a.common.seed;

  const synth::SynthResult result = synth::generate(cfg);
  const fs::path dir(a.common.out);
  std::vector<std::string> ids;
  for (const auto& n : result.dataset.nodes) ids.push_back(n.id);
  save_dataset(result.dataset, dir / "dataset.json");
  write_text_file_atomic(dir / "truth.json", synth::truth_to_json(result.truth, ids));

  Manifest m;
  m.command = "synth";
  m.args = args;
  m.seed = cfg.seed;
  m.config = {{"preset", preset_name.empty() ? json(nullptr) : json(preset_name)},
              {"synth", SynthConfigJson(cfg)}};
  m.outputs.push_back(FileEntry(dir / "dataset.json"));
  m.outputs.push_back(FileEntry(dir / "truth.json"));
  m.write(dir / "manifest.json");
  for (const auto& d : result.diagnostics) out << "warning: " << d << "\n";
  out << "synth: " << result.dataset.node_count() << " nodes, "
      << result.dataset.hyperedges.size() << " hyperedges, " << result.truth.size()
      << " planted edges -> " << dir.string() << "\n";
  return kSuccess;
}

// -------------------------------------------------------------- granger

struct GrangerArgs {
  Common common;
  std::string dataset;
  int lag = 2;
  double alpha = 0.01;
  std::string reduction = "pca1";
  bool bonferroni = false;
  unsigned threads = 0;
};

int RunGranger(const GrangerArgs& a, const std::vector<std::string>& args,
               std::ostream& out) {
  RequireFlag(!a.common.out.empty(), "--out", "granger");
  RequireFlag(!a.dataset.empty(), "--dataset", "granger");
  if (a.lag < 1) throw UsageError("granger: --lag must be >= 1");
  if (!(a.alpha > 0.0 && a.alpha < 1.0)) {
    throw UsageError("granger: --alpha must lie in (0, 1)");
  }
  granger::FeatureReduction mode;
  try {
    mode = granger::parse_reduction(a.reduction);
  } catch (const ContractViolation& e) {
    throw UsageError(std::string("granger: ") + e.what());
  }
  const Dataset ds = load_dataset(a.dataset);
  granger::GrangerConfig cfg;
  cfg.lag = a.lag;
  cfg.alpha = a.alpha;
  cfg.bonferroni = a.bonferroni;
  if (ds.timesteps < cfg.min_length()) {
    throw ValidationError("granger: series of length " + std::to_string(ds.timesteps) +
                          " are shorter than the minimum " +
                          std::to_string(cfg.min_length()) + " for lag " +
                          std::to_string(cfg.lag));
  }
  const granger::CausalGraph graph =
      granger::infer_causal_graph(ds, cfg, mode, a.threads);
  std::vector<std::string> ids;
  for (const auto& n : ds.nodes) ids.push_back(n.id);
  const fs::path dir(a.common.out);
  write_text_file_atomic(dir / "graph.json", granger::graph_to_json(graph, ids));

  Manifest m;
  m.command = "granger";
  m.args = args;
  m.seed = a.common.seed;
  m.config = {{"lag", a.lag},
              {"alpha", a.alpha},
              {"bonferroni", a.bonferroni},
              {"reduction", granger::to_string(mode)}};
  m.inputs.push_back(FileEntry(a.dataset));
  m.outputs.push_back(FileEntry(dir / "graph.json"));
  m.write(dir / "granger_manifest.json");
  out << "granger: " << graph.edges.size() << " edges over " << ds.node_count()
      << " nodes -> " << (dir / "graph.json").string() << "\n";
  return kSuccess;
}

// ---------------------------------------------------------------- train

struct TrainArgs {
  Common common;
  std::string dataset;
  std::string graph;
  bool no_causal = false;
  bool no_entropy = false;
  bool euclidean = false;
  bool pairwise = false;
  std::size_t embed_dim = 64;
  std::size_t layers = 2;
  TrainConfig train;
};

json TrainConfigJson(const TrainArgs& a, const TrainConfig& t) {
  return {{"embed_dim", a.embed_dim},   {"layers", a.layers},
          {"no_causal", a.no_causal},   {"no_entropy", a.no_entropy},
          {"euclidean", a.euclidean},   {"pairwise", a.pairwise},
          {"lambda1", t.lambda1},       {"lambda2", t.lambda2},
          {"lr", t.lr},                 {"batch_size", t.batch_size},
          {"epochs", t.max_epochs},     {"patience", t.patience},
          {"dropout", t.dropout},       {"kappa_init", t.kappa_init},
          {"seed", t.seed}};
}

void WriteTrainOutputs(const fs::path& dir, const TrainResult& result,
                       const Checkpoint& ckpt, Manifest& m) {
  save_checkpoint(ckpt, dir / "checkpoint.json");
  write_text_file_atomic(dir / "history.csv", history_to_csv(result.history));
  m.outputs.push_back(FileEntry(dir / "checkpoint.json"));
  m.outputs.push_back({{"path", (dir / "history.csv").string()},
                       {"digest", history_digest(result.history)},
                       {"digest_excludes", "wallclock_ms"}});
  m.write(dir / "train_manifest.json");
}

int RunTrain(const TrainArgs& a, const std::vector<std::string>& args,
             std::ostream& out, std::ostream& err) {
  RequireFlag(!a.common.out.empty(), "--out", "train");
  RequireFlag(!a.dataset.empty(), "--dataset", "train");
  if (!a.no_causal && a.graph.empty()) {
    throw UsageError("train: --graph is required unless --no-causal is given");
  }
  TrainConfig tc = a.train;
  tc.seed = a.common.seed;
  if (a.no_entropy) tc.lambda1 = 0.0;
  try {
    tc.validate();
  } catch (const ContractViolation& e) {
    throw UsageError(std::string("train: ") + e.what());
  }

  const Dataset ds = load_dataset(a.dataset);
  std::vector<std::string> ids;
  for (const auto& n : ds.nodes) ids.push_back(n.id);
  std::optional<granger::CausalGraph> graph;
  if (!a.no_causal) graph = granger::graph_from_json(read_text_file(a.graph), ids);

  ModelConfig mc = model_config_for(ds, a.embed_dim, a.layers);
  mc.euclidean = a.euclidean;
  mc.pairwise = a.pairwise;
  mc.use_causal = !a.no_causal;

  Manifest m;
  m.command = "train";
  m.args = args;
  m.seed = tc.seed;
  m.config = TrainConfigJson(a, tc);
  m.inputs.push_back(FileEntry(a.dataset));
  if (graph) m.inputs.push_back(FileEntry(a.graph));

  Checkpoint ckpt;
  ckpt.train = tc;
  ckpt.context_types = model_context_types(ds);
  ckpt.node_ids = ids;
  ckpt.graph = graph;
  ckpt.dataset_digest = dataset_digest(ds);
  const fs::path dir(a.common.out);
  try {
    const TrainResult result = train(ds, graph ? &*graph : nullptr, mc, tc);
    ckpt.model = result.model;
    ckpt.params = result.params;
    ckpt.best_epoch = result.best_epoch;
    ckpt.best_val_loss = result.best_val_loss;
    WriteTrainOutputs(dir, result, ckpt, m);
    out << "train: " << result.history.size() << " epochs, best epoch "
        << result.best_epoch << " (val loss " << result.best_val_loss << ") -> "
        << (dir / "checkpoint.json").string() << "\n";
  } catch (const TrainingDiverged& e) {
    const TrainResult& last = e.last_good();
    ckpt.model = last.model;
    ckpt.params = last.params;
    ckpt.best_epoch = last.best_epoch;
    ckpt.best_val_loss = std::isfinite(last.best_val_loss) ? last.best_val_loss : 0.0;
    WriteTrainOutputs(dir, last, ckpt, m);
    err << "error: " << e.what() << "; last good checkpoint written to "
        << (dir / "checkpoint.json").string() << "\n";
    return kDiverged;
  }
  return kSuccess;
}

// ----------------------------------------------------------------- eval

struct EvalArgs {
  Common common;
  std::string checkpoint;
  std::string dataset;
  std::string truth;
  double dropout_rate = 0.0;
  std::vector<std::size_t> k = {metrics::kDefaultTopK};
  std::string split = "test";
  std::size_t bins = metrics::kDefaultEceBins;
};

std::vector<std::size_t> SplitNodes(const Dataset& ds, const std::string& split) {
  if (split == "train") return ds.splits.train;
  if (split == "val") return ds.splits.val;
  if (split == "test") return ds.splits.test;
  std::vector<std::size_t> all(ds.node_count());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  return all;
}

json OptionalJson(const std::optional<double>& v) {
  return v ? json(*v) : json(nullptr);
}

int RunEval(const EvalArgs& a, const std::vector<std::string>& args, std::ostream& out) {
  RequireFlag(!a.common.out.empty(), "--out", "eval");
  RequireFlag(!a.checkpoint.empty(), "--checkpoint", "eval");
  RequireFlag(!a.dataset.empty(), "--dataset", "eval");
  if (!(a.dropout_rate >= 0.0 && a.dropout_rate < 1.0)) {
    throw UsageError("eval: --dropout-rate must lie in [0, 1)");
  }
  if (a.bins < 1) throw UsageError("eval: --bins must be >= 1");
  for (std::size_t k : a.k) {
    if (k < 1) throw UsageError("eval: --k must be >= 1");
  }

  const Checkpoint ckpt = load_checkpoint(a.checkpoint);
  Dataset ds = load_dataset(a.dataset);
  if (ds.dim != ckpt.model.input_dim) {
    throw ValidationError("eval: dataset feature dimension " + std::to_string(ds.dim) +
                          " does not match the checkpoint's " +
                          std::to_string(ckpt.model.input_dim));
  }
  if (ds.classes != ckpt.model.classes) {
    throw ValidationError("eval: dataset has " + std::to_string(ds.classes) +
                          " classes, the checkpoint " +
                          std::to_string(ckpt.model.classes));
  }
  if (a.dropout_rate > 0.0) {
    Rng rng = make_rng(a.common.seed, "feature-dropout");
    ds = feature_dropout(ds, a.dropout_rate, rng);
  }
  std::vector<std::string> ids;
  for (const auto& n : ds.nodes) ids.push_back(n.id);
  std::optional<granger::CausalGraph> graph;
  if (ckpt.graph) {
    graph = granger::graph_from_json(granger::graph_to_json(*ckpt.graph, ckpt.node_ids),
                                     ids);
  }
  const ModelInputs inputs = make_model_inputs(ds, graph ? &*graph : nullptr,
                                               ckpt.model, ckpt.context_types);
  const ForwardTrace trace = forward(inputs, ckpt.params, ckpt.model, Mode::kEval);
  const std::vector<std::size_t> nodes = SplitNodes(ds, a.split);
  metrics::EvalReport report = metrics::classification_report(
      trace.probs, ds.labels, nodes, ds.classes, a.bins);
  for (const auto& d : trace.diagnostics) report.diagnostics.push_back(d);

  const std::vector<metrics::ScoredEdge> scored = metrics::causal_edge_scores(inputs, trace);
  const metrics::AttentionAlignment alignment =
      metrics::causal_attention_alignment(inputs, trace);
  if (alignment.model.size() >= 2) {
    report.spearman = metrics::rank_correlation(alignment.model, alignment.reference);
  }
  if (!a.truth.empty()) {
    const auto truth = synth::truth_from_json(read_text_file(a.truth), ids);
    std::vector<metrics::EdgeKey> keys;
    for (const auto& e : truth) keys.push_back({e.src, e.dst});
    for (std::size_t k : a.k) {
      const auto p = metrics::precision_at_k(scored, keys, k);
      report.p_at_k[k] = p.precision;
      if (!p.diagnostic.empty()) report.diagnostics.push_back(p.diagnostic);
    }
  } else {
    report.diagnostics.push_back("no --truth given; precision@K not computed");
  }

  json p_at_k = json::object();
  for (const auto& [k, v] : report.p_at_k) p_at_k[std::to_string(k)] = v;
  const json doc = {
      {"metrics",
       {{"accuracy", report.accuracy},
        {"macro_f1", report.macro_f1},
        {"auc", OptionalJson(report.auc)},
        {"ece", report.ece},
        {"mean_entropy", report.mean_entropy},
        {"p_at_k", p_at_k},
        {"spearman", OptionalJson(report.spearman)},
        {"per_class_f1", report.per_class_f1}}},
      {"config",
       {{"ece_bins", report.ece_bins},
        {"k", a.k},
        {"split", a.split},
        {"dropout_rate", a.dropout_rate},
        {"seed", a.common.seed},
        {"checkpoint_config_digest", config_digest(ckpt.model, ckpt.train)}}},
      {"dataset_digest", dataset_digest(ds)},
      {"evaluated_nodes", report.evaluated_nodes},
      {"diagnostics", report.diagnostics}};
  const fs::path dir(a.common.out);
  write_text_file_atomic(dir / "report.json", doc.dump(1) + "\n");

  Manifest m;
  m.command = "eval";
  m.args = args;
  m.seed = a.common.seed;
  m.config = doc.at("config");
  m.inputs.push_back(FileEntry(a.checkpoint));
  m.inputs.push_back(FileEntry(a.dataset));
  if (!a.truth.empty()) m.inputs.push_back(FileEntry(a.truth));
  m.outputs.push_back(FileEntry(dir / "report.json"));
  m.write(dir / "eval_manifest.json");
  out << "eval: accuracy " << report.accuracy << ", macro-F1 " << report.macro_f1
      << ", ECE " << report.ece << " on " << report.evaluated_nodes << " "
      << a.split << " nodes -> " << (dir / "report.json").string() << "\n";
  return kSuccess;
}

// ------------------------------------------------------------ gradcheck

struct GradcheckArgs {
  Common common;
  std::string corrupt;
};

int RunGradcheck(const GradcheckArgs& a, const std::vector<std::string>& args,
                 std::ostream& out, std::ostream& err) {
  const TinyProblem problem = make_tiny_problem(a.common.seed);
  std::optional<std::string> corrupt;
  if (!a.corrupt.empty()) corrupt = a.corrupt;
  const GradcheckReport report = gradient_check(problem, kGradcheckStep, corrupt);
  const std::string text = gradcheck_to_json(report);
  out << text;
  if (!a.common.out.empty()) {
    const fs::path dir(a.common.out);
    write_text_file_atomic(dir / "gradcheck.json", text);
    Manifest m;
    m.command = "gradcheck";
    m.args = args;
    m.seed = a.common.seed;
    m.config = {{"step", report.step}, {"tolerance", report.tolerance}};
    m.outputs.push_back(FileEntry(dir / "gradcheck.json"));
    m.write(dir / "gradcheck_manifest.json");
  }
  if (!report.passed()) {
    std::vector<GroupCheck> worst = report.groups;
    std::sort(worst.begin(), worst.end(), [](const GroupCheck& x, const GroupCheck& y) {
      return x.max_rel_error > y.max_rel_error;
    });
    err << "gradcheck FAILED: max relative error " << report.max_rel_error
        << " exceeds " << report.tolerance << "\n";
    for (const auto& g : worst) {
      if (g.max_rel_error <= report.tolerance) break;
      err << "  " << g.name << "[" << g.worst_index << "]: relative error "
          << g.max_rel_error << " (analytic " << g.analytic << ", numeric "
          << g.numeric << ")\n";
    }
    return kGradcheckFailed;
  }
  return kSuccess;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Causal spherical hypergraph networks", "csphhn"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);

  SynthArgs synth_args;
  auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic dataset");
  AddCommon(synth_cmd, synth_args.common);
  synth_cmd->add_option("--preset", synth_args.preset, "toy | small | medium");

  GrangerArgs granger_args;
  auto* granger_cmd = app.add_subcommand("granger", "Infer the Granger causal graph");
  AddCommon(granger_cmd, granger_args.common);
  granger_cmd->add_option("--dataset", granger_args.dataset, "Dataset JSON");
  granger_cmd->add_option("--lag", granger_args.lag, "VAR lag order")
      ->capture_default_str();
  granger_cmd->add_option("--alpha", granger_args.alpha, "Significance level")
      ->capture_default_str();
  granger_cmd->add_option("--reduction", granger_args.reduction,
                          "Feature reduction: pca1 | mean")
      ->capture_default_str();
  granger_cmd->add_flag("--bonferroni", granger_args.bonferroni,
                        "Divide alpha by the number of ordered pairs");
  granger_cmd->add_option("--threads", granger_args.threads,
                          "Worker threads (0 = all cores)");

  TrainArgs train_args;
  auto* train_cmd = app.add_subcommand("train", "Train a model");
  AddCommon(train_cmd, train_args.common);
  TrainConfig& tc = train_args.train;
  train_cmd->add_option("--dataset", train_args.dataset, "Dataset JSON");
  train_cmd->add_option("--graph", train_args.graph, "Causal graph JSON");
  train_cmd->add_flag("--no-causal", train_args.no_causal, "Drop the causal graph");
  train_cmd->add_flag("--no-entropy", train_args.no_entropy,
                      "Drop the entropy term (lambda1 = 0)");
  train_cmd->add_flag("--euclidean", train_args.euclidean,
                      "Skip normalization; dot-product attention");
  train_cmd->add_flag("--pairwise", train_args.pairwise,
                      "Replace hyperedges by their 2-cliques");
  train_cmd->add_option("--embed-dim", train_args.embed_dim)->capture_default_str();
  train_cmd->add_option("--layers", train_args.layers)->capture_default_str();
  train_cmd->add_option("--lambda1", tc.lambda1, "Entropy weight")->capture_default_str();
  train_cmd->add_option("--lambda2", tc.lambda2, "Causal weight")->capture_default_str();
  train_cmd->add_option("--lr", tc.lr)->capture_default_str();
  train_cmd->add_option("--batch-size", tc.batch_size)->capture_default_str();
  train_cmd->add_option("--epochs", tc.max_epochs)->capture_default_str();
  train_cmd->add_option("--patience", tc.patience)->capture_default_str();
  train_cmd->add_option("--dropout", tc.dropout)->capture_default_str();
  train_cmd->add_option("--kappa-init", tc.kappa_init,
                        "Initial attention temperature")
      ->capture_default_str();

  EvalArgs eval_args;
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint");
  AddCommon(eval_cmd, eval_args.common);
  eval_cmd->add_option("--checkpoint", eval_args.checkpoint, "Checkpoint JSON");
  eval_cmd->add_option("--dataset", eval_args.dataset, "Dataset JSON");
  eval_cmd->add_option("--truth", eval_args.truth, "Ground-truth edges JSON");
  eval_cmd->add_option("--dropout-rate", eval_args.dropout_rate,
                       "Zero each test feature with this probability")
      ->capture_default_str();
  eval_cmd->add_option("--k", eval_args.k, "Precision@K cut-offs")->capture_default_str();
  eval_cmd->add_option("--split", eval_args.split, "train | val | test | all")
      ->check(CLI::IsMember({"train", "val", "test", "all"}))
      ->capture_default_str();
  eval_cmd->add_option("--bins", eval_args.bins, "ECE bins")->capture_default_str();

  GradcheckArgs gc_args;
  auto* gc_cmd = app.add_subcommand("gradcheck", "Check gradients on a tiny model");
  AddCommon(gc_cmd, gc_args.common);
  gc_cmd->add_option("--corrupt-gradient", gc_args.corrupt)->group("");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kSuccess;
  } catch (const CLI::CallForVersion&) {
    out << kVersion << "\n";
    return kSuccess;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << "\n" << app.help();
    return kUsageError;
  }

  try {
    for (auto* cmd : {granger_cmd, train_cmd, eval_cmd, gc_cmd}) {
      if (!cmd->parsed()) continue;
      const auto& cfg_path = cmd == granger_cmd  ? granger_args.common.config
                             : cmd == train_cmd ? train_args.common.config
                             : cmd == eval_cmd  ? eval_args.common.config
                                                : gc_args.common.config;
      if (!cfg_path.empty()) {
        try {
          ApplyConfig(cmd, ReadJsonFile(cfg_path, "config"));
        } catch (const CLI::ParseError& e) {
          throw ParseError(std::string("config: ") + e.what());
        }
      }
    }
    if (synth_cmd->parsed()) return RunSynth(synth_cmd, synth_args, args, out);
    if (granger_cmd->parsed()) return RunGranger(granger_args, args, out);
    if (train_cmd->parsed()) return RunTrain(train_args, args, out, err);
    if (eval_cmd->parsed()) return RunEval(eval_args, args, out);
    if (gc_cmd->parsed()) return RunGradcheck(gc_args, args, out, err);
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << "\n";
    return kUsageError;
  } catch (const TrainingDiverged& e) {
    err << "error: " << e.what() << "\n";
    return kDiverged;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kInputError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kInputError;
  }
  return kUsageError;
}

}  // namespace csphhn::cli
