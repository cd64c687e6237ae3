#include "csphhn/checkpoint.hpp"

#include "csphhn/errors.hpp"
#include "csphhn/io.hpp"
#include "json.hpp"

namespace csphhn {
namespace {

using nlohmann::json;

json ModelConfigJson(const ModelConfig& c) {
  return {{"input_dim", c.input_dim},       {"embed_dim", c.embed_dim},
          {"classes", c.classes},           {"context_types", c.context_types},
          {"layers", c.layers},             {"dropout", c.dropout},
          {"attn_temp_init", c.attn_temp_init},
          {"gamma_temp_init", c.gamma_temp_init},
          {"euclidean", c.euclidean},       {"pairwise", c.pairwise},
          {"use_causal", c.use_causal}};
}

ModelConfig ModelConfigFrom(const json& j) {
  ModelConfig c;
  c.input_dim = j.at("input_dim").get<std::size_t>();
  c.embed_dim = j.at("embed_dim").get<std::size_t>();
  c.classes = j.at("classes").get<std::size_t>();
  c.context_types = j.at("context_types").get<std::size_t>();
  c.layers = j.at("layers").get<std::size_t>();
  c.dropout = j.at("dropout").get<double>();
  c.attn_temp_init = j.at("attn_temp_init").get<double>();
  c.gamma_temp_init = j.at("gamma_temp_init").get<double>();
  c.euclidean = j.at("euclidean").get<bool>();
  c.pairwise = j.at("pairwise").get<bool>();
  c.use_causal = j.at("use_causal").get<bool>();
  return c;
}

json TrainConfigJson(const TrainConfig& c) {
  return {{"lambda1", c.lambda1},       {"lambda2", c.lambda2},
          {"lr", c.lr},                 {"batch_size", c.batch_size},
          {"max_epochs", c.max_epochs}, {"patience", c.patience},
          {"dropout", c.dropout},       {"seed", c.seed},
          {"kappa_init", c.kappa_init},
          {"adam", {{"beta1", c.beta1}, {"beta2", c.beta2}, {"epsilon", c.epsilon}}}};
}

TrainConfig TrainConfigFrom(const json& j) {
  TrainConfig c;
  c.lambda1 = j.at("lambda1").get<double>();
  c.lambda2 = j.at("lambda2").get<double>();
  c.lr = j.at("lr").get<double>();
  c.batch_size = j.at("batch_size").get<std::size_t>();
  c.max_epochs = j.at("max_epochs").get<std::size_t>();
  c.patience = j.at("patience").get<std::size_t>();
  c.dropout = j.at("dropout").get<double>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.kappa_init = j.at("kappa_init").get<double>();
  c.beta1 = j.at("adam").at("beta1").get<double>();
  c.beta2 = j.at("adam").at("beta2").get<double>();
  c.epsilon = j.at("adam").at("epsilon").get<double>();
  return c;
}

}  // namespace

std::string config_digest(const ModelConfig& model, const TrainConfig& train) {
  const json doc = {{"model", ModelConfigJson(model)}, {"train", TrainConfigJson(train)}};
  return hex_digest(fnv1a64(doc.dump()));
}

std::string checkpoint_to_json(const Checkpoint& ckpt) {
  json params = json::array();
  ckpt.params.for_each([&](std::string_view name, std::span<const double> values) {
    params.push_back({{"name", std::string(name)},
                      {"values", std::vector<double>(values.begin(), values.end())}});
  });
  json doc = {
      {"format", "csphhn-checkpoint"},
      {"version", kCheckpointVersion},
      {"config_digest", config_digest(ckpt.model, ckpt.train)},
      {"model", ModelConfigJson(ckpt.model)},
      {"train", TrainConfigJson(ckpt.train)},
      {"context_types", ckpt.context_types},
      {"node_ids", ckpt.node_ids},
      {"best_epoch", ckpt.best_epoch},
      {"best_val_loss", ckpt.best_val_loss},
      {"dataset_digest", ckpt.dataset_digest},
      {"params", params},
  };
  doc["causal_graph"] =
      ckpt.graph ? json::parse(granger::graph_to_json(*ckpt.graph, ckpt.node_ids))
                 : json(nullptr);
  return doc.dump(1) + "\n";
}

Checkpoint checkpoint_from_json(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("checkpoint JSON: ") + e.what());
  }
  Checkpoint ckpt;
  std::string digest;
  try {
    if (doc.at("format").get<std::string>() != "csphhn-checkpoint") {
      throw ParseError("checkpoint: unexpected format tag");
    }
    const int version = doc.at("version").get<int>();
    if (version != kCheckpointVersion) {
      throw ParseError("checkpoint: unsupported version " + std::to_string(version));
    }
    digest = doc.at("config_digest").get<std::string>();
    ckpt.model = ModelConfigFrom(doc.at("model"));
    ckpt.train = TrainConfigFrom(doc.at("train"));
    ckpt.context_types = doc.at("context_types").get<std::vector<std::string>>();
    ckpt.node_ids = doc.at("node_ids").get<std::vector<std::string>>();
    ckpt.best_epoch = doc.at("best_epoch").get<std::size_t>();
    ckpt.best_val_loss = doc.at("best_val_loss").get<double>();
    ckpt.dataset_digest = doc.at("dataset_digest").get<std::string>();

    ckpt.model.validate();
    ckpt.params = ModelParams::Zeros(ckpt.model);
    const json& params = doc.at("params");
    std::size_t k = 0;
    ckpt.params.for_each([&](std::string_view name, std::span<double> values) {
      if (k >= params.size()) {
        throw ValidationError("checkpoint: missing parameter '" + std::string(name) + "'");
      }
      const json& entry = params[k++];
      if (entry.at("name").get<std::string>() != name) {
        throw ValidationError("checkpoint: expected parameter '" + std::string(name) +
                              "', found '" + entry.at("name").get<std::string>() + "'");
      }
      const auto v = entry.at("values").get<std::vector<double>>();
      if (v.size() != values.size()) {
        throw ValidationError("checkpoint: parameter '" + std::string(name) + "' has " +
                              std::to_string(v.size()) + " values, expected " +
                              std::to_string(values.size()));
      }
      std::copy(v.begin(), v.end(), values.begin());
    });
    if (k != params.size()) throw ValidationError("checkpoint: extra parameters");
    if (!doc.at("causal_graph").is_null()) {
      ckpt.graph = granger::graph_from_json(doc.at("causal_graph").dump(), ckpt.node_ids);
    }
  } catch (const json::exception& e) {
    throw ParseError(std::string("checkpoint JSON: ") + e.what());
  }
  if (digest != config_digest(ckpt.model, ckpt.train)) {
    throw ValidationError("checkpoint: config digest mismatch");
  }
  if (ckpt.context_types.size() != ckpt.model.context_types) {
    throw ValidationError("checkpoint: context type list does not match the model");
  }
  try {
    ckpt.params.validate(ckpt.model);
  } catch (const ContractViolation& e) {
    throw ValidationError(std::string("checkpoint: ") + e.what());
  }
  return ckpt;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  write_text_file_atomic(path, checkpoint_to_json(ckpt));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  return checkpoint_from_json(read_text_file(path));
}

}  // namespace csphhn
