#include "csphhn/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>

#include "csphhn/vmf.hpp"

namespace csphhn {

void TrainConfig::validate() const {
  CSPHHN_REQUIRE(lr >= 0.0 && std::isfinite(lr), "TrainConfig: lr must be >= 0");
  CSPHHN_REQUIRE(lambda1 >= 0.0 && lambda2 >= 0.0,
                 "TrainConfig: lambda1 and lambda2 must be >= 0");
  CSPHHN_REQUIRE(batch_size >= 1, "TrainConfig: batch_size must be >= 1");
  CSPHHN_REQUIRE(patience >= 1, "TrainConfig: patience must be >= 1");
  CSPHHN_REQUIRE(dropout >= 0.0 && dropout < 1.0,
                 "TrainConfig: dropout must lie in [0, 1)");
  CSPHHN_REQUIRE(kappa_init > 0.0, "TrainConfig: kappa_init must be > 0");
  CSPHHN_REQUIRE(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0 &&
                     epsilon > 0.0,
                 "TrainConfig: invalid Adam moments");
}

LossBreakdown loss(const ForwardTrace& trace, std::span<const int> labels,
                   std::span<const std::size_t> batch, const ModelInputs& inputs,
                   const TrainConfig& cfg, OutputGradients* grads) {
  const std::size_t n = trace.logits.size();
  CSPHHN_REQUIRE(!batch.empty(), "loss: empty batch");
  CSPHHN_REQUIRE(labels.size() == n, "loss: one label per node required");
  const std::size_t classes = trace.logits.empty() ? 0 : trace.logits[0].size();
  const int dim = trace.projected.empty() ? 2
                                          : static_cast<int>(trace.projected[0].size());
  if (grads != nullptr) {
    grads->logits.assign(n, Vector(classes, 0.0));
    grads->kappa.assign(n, 0.0);
    grads->gamma_temp = 0.0;
  }

  const double inv_b = 1.0 / static_cast<double>(batch.size());
  LossBreakdown out;
  std::size_t with_parents = 0;
  for (std::size_t i : batch) {
    CSPHHN_REQUIRE(i < n, "loss: batch node out of range");
    const int y = labels[i];
    CSPHHN_REQUIRE(y >= 0 && static_cast<std::size_t>(y) < classes,
                   "loss: label " + std::to_string(y) + " out of range");
    out.pred += logsumexp(trace.logits[i]) - trace.logits[i][y];
    out.entropy += trace.entropy[i];
    if (grads != nullptr) {
      Vector& dl = grads->logits[i];
      for (std::size_t c = 0; c < classes; ++c) dl[c] = trace.probs[i][c] * inv_b;
      dl[y] -= inv_b;
      grads->kappa[i] =
          cfg.lambda1 * inv_b * vmf::entropy_derivative(dim, trace.kappa[i]);
    }
    if (!inputs.parents[i].empty()) ++with_parents;
  }
  out.pred *= inv_b;
  out.entropy *= inv_b;

  if (with_parents > 0) {
    const double inv_c = 1.0 / static_cast<double>(with_parents);
    for (std::size_t i : batch) {
      const auto& parents = inputs.parents[i];
      if (parents.empty()) continue;
      Vector ref_logits(parents.size());
      Vector model_logits(parents.size());
      for (std::size_t k = 0; k < parents.size(); ++k) {
        ref_logits[k] = parents[k].f_statistic;
        model_logits[k] = trace.gamma_temp * parents[k].f_statistic;
      }
      const double ref_lse = logsumexp(ref_logits);
      const double model_lse = logsumexp(model_logits);
      double kl = 0.0;
      for (std::size_t k = 0; k < parents.size(); ++k) {
        const double log_ref = ref_logits[k] - ref_lse;
        const double ref = std::exp(log_ref);
        if (ref > 0.0) kl += ref * (log_ref - (model_logits[k] - model_lse));
      }
      out.causal += kl;
      if (grads != nullptr) {
        const Vector& gamma = trace.causal_weights[i];
        double dg = 0.0;
        for (std::size_t k = 0; k < parents.size(); ++k) {
          const double ref = std::exp(ref_logits[k] - ref_lse);
          dg += (gamma[k] - ref) * parents[k].f_statistic;
        }
        grads->gamma_temp += cfg.lambda2 * inv_c * dg;
      }
    }
    out.causal *= inv_c;
  }
  out.total = out.pred + cfg.lambda1 * out.entropy + cfg.lambda2 * out.causal;
  return out;
}

GradientResult gradients(const ModelInputs& inputs, const ModelParams& params,
                         const ModelConfig& model_cfg, std::span<const int> labels,
                         std::span<const std::size_t> batch,
                         const TrainConfig& cfg, Mode mode, Rng* rng,
                         const DropoutMasks* masks) {
  const ForwardTrace trace = forward(inputs, params, model_cfg, mode, rng, masks);
  OutputGradients up;
  GradientResult out;
  out.loss = loss(trace, labels, batch, inputs, cfg, &up);
  out.grads = backward(inputs, params, model_cfg, trace, up);
  out.grads.for_each([](std::string_view name, std::span<const double> s) {
    if (!all_finite(s)) {
      throw NumericalError("non-finite gradient in parameter '" +
                           std::string(name) + "'");
    }
  });
  return out;
}

namespace {

std::vector<std::span<double>> Tensors(ModelParams& p) {
  std::vector<std::span<double>> out;
  p.for_each([&](std::string_view, std::span<double> s) { out.push_back(s); });
  return out;
}

std::vector<std::span<const double>> Tensors(const ModelParams& p) {
  std::vector<std::span<const double>> out;
  p.for_each([&](std::string_view, std::span<const double> s) { out.push_back(s); });
  return out;
}

constexpr double kMinTemperature = 1e-6;

}  // namespace

AdamOptimizer::AdamOptimizer(const ModelConfig& cfg, double lr, double beta1,
                             double beta2, double epsilon)
    : lr_(lr),
      beta1_(beta1),
      beta2_(beta2),
      epsilon_(epsilon),
      m_(ModelParams::Zeros(cfg)),
      v_(ModelParams::Zeros(cfg)) {}

void AdamOptimizer::step(ModelParams& params, const ModelParams& grads) {
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  auto x = Tensors(params);
  auto g = Tensors(grads);
  auto m = Tensors(m_);
  auto v = Tensors(v_);
  CSPHHN_REQUIRE(x.size() == g.size(), "AdamOptimizer: gradient layout mismatch");
  for (std::size_t k = 0; k < x.size(); ++k) {
    CSPHHN_REQUIRE(x[k].size() == g[k].size(), "AdamOptimizer: tensor size mismatch");
    for (std::size_t e = 0; e < x[k].size(); ++e) {
      m[k][e] = beta1_ * m[k][e] + (1.0 - beta1_) * g[k][e];
      v[k][e] = beta2_ * v[k][e] + (1.0 - beta2_) * g[k][e] * g[k][e];
      x[k][e] -= lr_ * (m[k][e] / c1) / (std::sqrt(v[k][e] / c2) + epsilon_);
    }
  }
  params.attn_temp = std::max(params.attn_temp, kMinTemperature);
  params.gamma_temp = std::max(params.gamma_temp, kMinTemperature);
}

ModelConfig model_config_for(const Dataset& ds, std::size_t embed_dim,
                             std::size_t layers) {
  ModelConfig cfg;
  cfg.input_dim = ds.dim;
  cfg.embed_dim = embed_dim;
  cfg.classes = ds.classes;
  cfg.context_types = model_context_types(ds).size();
  cfg.layers = layers;
  return cfg;
}

TrainResult train(const Dataset& ds, const granger::CausalGraph* graph,
                  ModelConfig model_cfg, const TrainConfig& cfg) {
  const ModelInputs inputs =
      make_model_inputs(ds, graph, model_cfg, model_context_types(ds));
  return train(inputs, ds, std::move(model_cfg), cfg);
}

TrainResult train(const ModelInputs& inputs, const Dataset& ds,
                  ModelConfig model_cfg, const TrainConfig& cfg) {
  cfg.validate();
  model_cfg.dropout = cfg.dropout;
  model_cfg.attn_temp_init = cfg.kappa_init;
  model_cfg.validate();
  CSPHHN_REQUIRE(!ds.splits.train.empty(), "train: empty training split");

  Rng init_rng = make_rng(cfg.seed, "model-init");
  Rng order_rng = make_rng(cfg.seed, "batch-order");
  Rng dropout_rng = make_rng(cfg.seed, "dropout");

  TrainResult result;
  result.model = model_cfg;
  ModelParams params = ModelParams::Init(model_cfg, init_rng);
  result.params = params;
  result.best_val_loss = std::numeric_limits<double>::infinity();

  AdamOptimizer opt(model_cfg, cfg.lr, cfg.beta1, cfg.beta2, cfg.epsilon);
  std::vector<std::size_t> order = ds.splits.train;
  const std::vector<std::size_t>& val =
      ds.splits.val.empty() ? ds.splits.train : ds.splits.val;
  std::size_t since_best = 0;
  const auto start = std::chrono::steady_clock::now();

  for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), order_rng);
    EpochRecord rec;
    rec.epoch = epoch;
    double seen = 0.0;
    for (std::size_t first = 0; first < order.size(); first += cfg.batch_size) {
      const std::size_t last = std::min(order.size(), first + cfg.batch_size);
      const std::span<const std::size_t> batch(order.data() + first, last - first);
      GradientResult gr;
      try {
        gr = gradients(inputs, params, model_cfg, ds.labels, batch, cfg,
                       Mode::kTrain, &dropout_rng);
      } catch (const NumericalError& e) {
        throw TrainingDiverged(std::string("training diverged at epoch ") +
                                   std::to_string(epoch) + ": " + e.what(),
                               result);
      }
      if (!std::isfinite(gr.loss.total)) {
        throw TrainingDiverged("training diverged at epoch " +
                                   std::to_string(epoch) + ": loss is not finite",
                               result);
      }
      const double w = static_cast<double>(batch.size());
      rec.train_loss += w * gr.loss.total;
      rec.pred += w * gr.loss.pred;
      rec.entropy += w * gr.loss.entropy;
      rec.causal += w * gr.loss.causal;
      seen += w;
      opt.step(params, gr.grads);
      bool finite = true;
      params.for_each([&](std::string_view, std::span<const double> s) {
        finite = finite && all_finite(s);
      });
      if (!finite) {
        throw TrainingDiverged("training diverged at epoch " + std::to_string(epoch) +
                                   ": parameters became non-finite",
                               result);
      }
    }
    rec.train_loss /= seen;
    rec.pred /= seen;
    rec.entropy /= seen;
    rec.causal /= seen;

    const ForwardTrace val_trace = forward(inputs, params, model_cfg, Mode::kEval);
    rec.val_loss = loss(val_trace, ds.labels, val, inputs, cfg).total;
    rec.wallclock_ms = std::chrono::duration<double, std::milli>(
                           std::chrono::steady_clock::now() - start)
                           .count();
    if (!std::isfinite(rec.val_loss)) {
      throw TrainingDiverged("training diverged at epoch " + std::to_string(epoch) +
                                 ": validation loss is not finite",
                             result);
    }
    result.history.push_back(rec);

    if (rec.val_loss < result.best_val_loss) {
      result.best_val_loss = rec.val_loss;
      result.best_epoch = epoch;
      result.params = params;
      since_best = 0;
    } else if (++since_best >= cfg.patience) {
      break;
    }
  }
  return result;
}

namespace {

std::string FormatRow(const EpochRecord& r, bool with_clock) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), "%zu,%.12g,%.12g,%.12g,%.12g,%.12g", r.epoch,
                r.train_loss, r.val_loss, r.pred, r.entropy, r.causal);
  std::string row = buf;
  if (with_clock) {
    std::snprintf(buf, sizeof(buf), ",%.3f", r.wallclock_ms);
    row += buf;
  }
  return row;
}

}  // namespace

std::string history_to_csv(const std::vector<EpochRecord>& history) {
  std::string out = "epoch,train_loss,val_loss,pred,entropy,causal,wallclock_ms\n";
  for (const auto& r : history) out += FormatRow(r, true) + "\n";
  return out;
}

std::string history_digest(const std::vector<EpochRecord>& history) {
  std::string body;
  for (const auto& r : history) body += FormatRow(r, false) + "\n";
  return hex_digest(fnv1a64(body));
}

}  // namespace csphhn
