#ifndef CSPHHN_CHECKPOINT_HPP_
#define CSPHHN_CHECKPOINT_HPP_

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "csphhn/granger.hpp"
#include "csphhn/model.hpp"
#include "csphhn/training.hpp"

namespace csphhn {

inline constexpr int kCheckpointVersion = 1;

// Everything needed to rerun a trained model on a dataset: configuration,
// parameters, the context-type mapping, and the causal graph it was trained
// with (edges refer to `node_ids`).
struct Checkpoint {
  ModelConfig model;
  TrainConfig train;
  ModelParams params;
  std::vector<std::string> context_types;
  std::vector<std::string> node_ids;
  std::optional<granger::CausalGraph> graph;
  std::size_t best_epoch = 0;
  double best_val_loss = 0.0;
  std::string dataset_digest;

  friend bool operator==(const Checkpoint&, const Checkpoint&) = default;
};

// Digest of the model and training configuration.
std::string config_digest(const ModelConfig& model, const TrainConfig& train);

std::string checkpoint_to_json(const Checkpoint& ckpt);

// Throws ParseError for malformed documents and ValidationError when the
// parameters do not match the embedded configuration or the digest.
Checkpoint checkpoint_from_json(const std::string& text);

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace csphhn

#endif  // CSPHHN_CHECKPOINT_HPP_
