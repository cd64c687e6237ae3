#ifndef CSPHHN_MODEL_HPP_
#define CSPHHN_MODEL_HPP_

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "csphhn/granger.hpp"
#include "csphhn/hypergraph.hpp"
#include "csphhn/linalg.hpp"
#include "csphhn/rng.hpp"

// Causal spherical hypergraph network.
//
//   z_i     = W x_i + b,  h_i = z_i / |z_i|,  kappa_i = softplus(w_k . z_i + b_k)
//   a_ij^e  = softmax_{j in e}(tau h_i . h_j)                      (self included)
//   h_i'    = normalize(ReLU(sum_{e ni i} sum_{j in e} a_ij^e W_type(e) h_j))
//   g_ij    = softmax_{j in parents(i)}(gamma F_{j->i})
//   h_final = normalize(h_i^L + sum_j g_ij W_c h_j^L)               (if parents)
//   p_i     = softmax(W_out h_final + b_out)
//
// The Euclidean ablation drops every normalization (attention uses raw dot
// products); the pairwise ablation replaces hyperedges by their 2-cliques.
namespace csphhn {

struct ModelConfig {
  std::size_t input_dim = 0;
  std::size_t embed_dim = 64;
  std::size_t classes = 2;
  std::size_t context_types = 1;
  std::size_t layers = 2;
  double dropout = 0.2;
  double attn_temp_init = 20.0;
  double gamma_temp_init = 1.0;
  bool euclidean = false;
  bool pairwise = false;
  bool use_causal = true;

  void validate() const;
  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

struct ModelParams {
  Matrix proj_w;               // embed x input
  Vector proj_b;               // embed
  Vector kappa_w;              // embed
  double kappa_b = 0.0;
  std::vector<Matrix> edge_w;  // one embed x embed matrix per context type
  double attn_temp = 20.0;
  Matrix causal_w;             // embed x embed
  double gamma_temp = 1.0;
  Matrix head_w;               // classes x embed
  Vector head_b;               // classes

  static ModelParams Zeros(const ModelConfig& cfg);
  static ModelParams Init(const ModelConfig& cfg, Rng& rng);

  // Throws ContractViolation on shape mismatch, non-finite entries or
  // non-positive temperatures.
  void validate(const ModelConfig& cfg) const;

  // Visits every tensor (scalars as 1-element spans) in a fixed order.
  template <class F>
  void for_each(F&& f) {
    f(std::string_view("proj_w"), proj_w.data());
    f(std::string_view("proj_b"), std::span<double>(proj_b));
    f(std::string_view("kappa_w"), std::span<double>(kappa_w));
    f(std::string_view("kappa_b"), std::span<double>(&kappa_b, 1));
    for (std::size_t k = 0; k < edge_w.size(); ++k) {
      const std::string name = "edge_w[" + std::to_string(k) + "]";
      f(std::string_view(name), edge_w[k].data());
    }
    f(std::string_view("attn_temp"), std::span<double>(&attn_temp, 1));
    f(std::string_view("causal_w"), causal_w.data());
    f(std::string_view("gamma_temp"), std::span<double>(&gamma_temp, 1));
    f(std::string_view("head_w"), head_w.data());
    f(std::string_view("head_b"), std::span<double>(head_b));
  }
  template <class F>
  void for_each(F&& f) const {
    const_cast<ModelParams*>(this)->for_each(
        [&](std::string_view name, std::span<double> s) {
          f(name, std::span<const double>(s));
        });
  }

  std::size_t parameter_count() const;
  friend bool operator==(const ModelParams&, const ModelParams&) = default;
};

// Graph structure and inputs the forward pass reads; built once per
// (dataset, causal graph, config).
struct ModelInputs {
  Matrix features;  // N x d, features at the last observed timestep
  std::vector<std::vector<std::size_t>> edge_members;
  std::vector<std::size_t> edge_type;
  std::vector<std::vector<std::size_t>> node_edges;
  std::vector<std::vector<granger::CausalGraph::Parent>> parents;

  std::size_t node_count() const { return features.rows(); }
};

// `context_types` fixes the type -> W_e index mapping (taken from the
// training dataset). Applies the pairwise expansion and drops the causal
// graph according to `cfg`. Throws ValidationError for unknown types.
// The type list a model trained on `ds` uses: its sorted context types, or a
// single placeholder type when the dataset has no hyperedges.
std::vector<std::string> model_context_types(const Dataset& ds);

ModelInputs make_model_inputs(const Dataset& ds,
                              const granger::CausalGraph* graph,
                              const ModelConfig& cfg,
                              const std::vector<std::string>& context_types);

inline constexpr double kDegenerateNorm = 1e-12;

struct SphericalEmbedding {
  Vector h;
  double kappa = 0.0;
  bool degenerate = false;
};

// h = (Wx+b)/|Wx+b|, kappa = softplus(w_k . (Wx+b) + b_k). Below
// kDegenerateNorm the embedding falls back to e1 with kappa = 0.
SphericalEmbedding project(std::span<const double> x, const ModelParams& params,
                           bool euclidean = false);

// Row r holds the weights of members[r] over all members (rows sum to 1).
std::vector<Vector> edge_attention(std::span<const std::size_t> members,
                                   const std::vector<Vector>& embeddings,
                                   double attn_temp);

// W_k h_j for every context type k and node j: result[k][j].
std::vector<std::vector<Vector>> transform_embeddings(
    const std::vector<Vector>& embeddings, const ModelParams& params);

// Pre-activation m_i = sum_{e ni i} sum_{j in e} a_ij^e W_type(e) h_j, where
// attention[e] is edge_attention over inputs.edge_members[e].
Vector hyperedge_aggregate(std::size_t node, const ModelInputs& inputs,
                           const std::vector<std::vector<Vector>>& transformed,
                           const std::vector<std::vector<Vector>>& attention);

struct CausalMix {
  Vector weights;  // over parents, in parent order
  Vector mixed;    // h_i + sum_j g_ij W_c h_j before normalization
  Vector output;
};

// Identity on h_i when the node has no causal parents.
CausalMix causal_aggregate(std::size_t node, const ModelInputs& inputs,
                           const std::vector<Vector>& embeddings,
                           const ModelParams& params, bool euclidean = false);

enum class Mode { kTrain, kEval };

// masks[layer][node][k]: inverted-dropout multipliers (0 or 1/(1-p)).
using DropoutMasks = std::vector<std::vector<Vector>>;

struct AttentionGroup {
  std::size_t edge = 0;
  std::size_t node = 0;  // the querying member i
  Vector weights;        // over inputs.edge_members[edge]
};

struct LayerTrace {
  std::vector<Vector> input;
  std::vector<AttentionGroup> groups;
  std::vector<Vector> pre;   // m_i
  std::vector<Vector> mask;  // empty in eval mode
  std::vector<Vector> act;   // ReLU(m_i * mask)
  Vector act_norm;
  std::vector<Vector> output;
};

struct ForwardTrace {
  std::vector<Vector> z;
  Vector z_norm;
  Vector kappa_logit;
  Vector kappa;
  Vector entropy;  // vMF entropy of each node's belief, nats
  std::vector<Vector> projected;
  std::vector<LayerTrace> layers;
  std::vector<Vector> causal_weights;  // per node, over inputs.parents[i]
  std::vector<Vector> causal_mixed;
  Vector causal_norm;
  double gamma_temp = 0.0;  // causal attention temperature used
  std::vector<Vector> final_embedding;
  std::vector<Vector> logits;
  std::vector<Vector> probs;
  std::vector<std::string> diagnostics;
};

// Full-graph forward. In kTrain mode with dropout > 0 the masks come from
// `masks` when given, else are drawn from `rng`.
ForwardTrace forward(const ModelInputs& inputs, const ModelParams& params,
                     const ModelConfig& cfg, Mode mode, Rng* rng = nullptr,
                     const DropoutMasks* masks = nullptr);

// Upstream gradients at the forward outputs.
struct OutputGradients {
  std::vector<Vector> logits;  // N x C (zero rows for nodes outside the batch)
  Vector kappa;                // dL/dkappa_i
  double gamma_temp = 0.0;     // direct dL/dgamma (causal regularizer)
};

// Reverse-mode gradient of a loss whose output gradients are `upstream`.
ModelParams backward(const ModelInputs& inputs, const ModelParams& params,
                     const ModelConfig& cfg, const ForwardTrace& trace,
                     const OutputGradients& upstream);

// JSON dump of a trace (embeddings, attention, causal weights, probs).
std::string trace_to_json(const ForwardTrace& trace);

}  // namespace csphhn

#endif  // CSPHHN_MODEL_HPP_
