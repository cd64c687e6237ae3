#ifndef CSPHHN_TRAINING_HPP_
#define CSPHHN_TRAINING_HPP_

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "csphhn/errors.hpp"
#include "csphhn/granger.hpp"
#include "csphhn/hypergraph.hpp"
#include "csphhn/model.hpp"

namespace csphhn {

struct TrainConfig {
  double lambda1 = 0.01;  // entropy weight
  double lambda2 = 0.1;   // causal-alignment weight
  double lr = 1e-3;
  std::size_t batch_size = 128;
  std::size_t max_epochs = 100;
  std::size_t patience = 10;
  double dropout = 0.2;
  std::uint64_t seed = 0;
  double kappa_init = 20.0;  // initial attention temperature
  // Adam moments; standard defaults.
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  void validate() const;
  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

struct LossBreakdown {
  double total = 0.0;
  double pred = 0.0;
  double entropy = 0.0;
  double causal = 0.0;
};

// L = L_pred + lambda1 L_entropy + lambda2 L_causal over `batch`:
//   L_pred    mean cross-entropy,
//   L_entropy mean vMF entropy H_i,
//   L_causal  mean over batch nodes with parents of KL(g_ref || g), where
//             g_ref = softmax(F) over the node's parents and g the model's
//             causal attention.
// When `grads` is non-null it receives dL/d(outputs) for backward().
LossBreakdown loss(const ForwardTrace& trace, std::span<const int> labels,
                   std::span<const std::size_t> batch, const ModelInputs& inputs,
                   const TrainConfig& cfg, OutputGradients* grads = nullptr);

struct GradientResult {
  ModelParams grads;
  LossBreakdown loss;
};

// Forward + loss + backward. Throws NumericalError naming the first
// parameter tensor with a non-finite gradient.
GradientResult gradients(const ModelInputs& inputs, const ModelParams& params,
                         const ModelConfig& model_cfg, std::span<const int> labels,
                         std::span<const std::size_t> batch,
                         const TrainConfig& cfg, Mode mode = Mode::kEval,
                         Rng* rng = nullptr, const DropoutMasks* masks = nullptr);

class AdamOptimizer {
 public:
  AdamOptimizer(const ModelConfig& cfg, double lr, double beta1, double beta2,
                double epsilon);
  void step(ModelParams& params, const ModelParams& grads);
  std::size_t steps() const { return t_; }

 private:
  double lr_, beta1_, beta2_, epsilon_;
  std::size_t t_ = 0;
  ModelParams m_;
  ModelParams v_;
};

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double pred = 0.0;
  double entropy = 0.0;
  double causal = 0.0;
  double wallclock_ms = 0.0;
};

struct TrainResult {
  ModelParams params;  // best-validation checkpoint
  ModelConfig model;
  std::vector<EpochRecord> history;
  std::size_t best_epoch = 0;
  double best_val_loss = 0.0;
};

class TrainingDiverged : public NumericalError {
 public:
  TrainingDiverged(const std::string& what, TrainResult last_good)
      : NumericalError(what), last_good_(std::move(last_good)) {}
  const TrainResult& last_good() const { return last_good_; }

 private:
  TrainResult last_good_;
};

// Adam over shuffled node minibatches of the training split, full-graph
// forward per batch, early stopping on validation loss. The dropout rate and
// initial attention temperature in `cfg` override those in `model_cfg`.
TrainResult train(const Dataset& ds, const granger::CausalGraph* graph,
                  ModelConfig model_cfg, const TrainConfig& cfg);

// Same, on prebuilt inputs.
TrainResult train(const ModelInputs& inputs, const Dataset& ds,
                  ModelConfig model_cfg, const TrainConfig& cfg);

// epoch,train_loss,val_loss,pred,entropy,causal,wallclock_ms
std::string history_to_csv(const std::vector<EpochRecord>& history);

// Digest of the history excluding the wall-clock column.
std::string history_digest(const std::vector<EpochRecord>& history);

// Model configuration for a dataset with the given ablation switches.
ModelConfig model_config_for(const Dataset& ds, std::size_t embed_dim,
                             std::size_t layers);

}  // namespace csphhn

#endif  // CSPHHN_TRAINING_HPP_
