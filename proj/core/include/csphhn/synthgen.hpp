#ifndef CSPHHN_SYNTHGEN_HPP_
#define CSPHHN_SYNTHGEN_HPP_

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "csphhn/hypergraph.hpp"

// Seeded social-dynamics generator with planted lagged influence.
//
// Each node carries x_i^t = m0 + beta * mu_g(i) + s_i^t, where m0 is a
// baseline shared by every node, mu_g a unit community direction near the
// prototype of the community's class, and s follows the stable VAR(1)
//   s_j^{t+1} = a s_j^t + sum_{i -> j} c_ij s_i^t + sigma eps.
// Hyperedges draw their members mostly from one community. A community's
// label is the class whose prototype best matches the community's mean
// direction at step T - 1 + horizon; node labels follow their community and
// are then flipped with probability `label_noise`.
//
// With `peripheral_targets`, the destinations of generated influence edges
// belong to no community and no hyperedge; they inherit the label of their
// source's community, so the influence link is their only class signal.
namespace csphhn::synth {

struct PlantedEdge {
  std::size_t src = 0;
  std::size_t dst = 0;
  double coef = 0.0;

  friend bool operator==(const PlantedEdge&, const PlantedEdge&) = default;
};

struct SynthConfig {
  std::size_t n_nodes = 40;
  std::size_t n_hyperedges = 120;
  double mean_edge_size = 4.0;
  std::size_t dim = 16;
  std::size_t timesteps = 64;
  std::size_t classes = 4;
  std::size_t horizon = 1;
  std::size_t communities = 4;
  std::size_t context_types = 3;
  // Probability that a hyperedge slot is filled from outside its community.
  double community_mixing = 0.1;
  double self_coef = 0.1;
  double noise_sigma = 1.0;
  double signal_strength = 1.0;   // beta
  double baseline_offset = 0.0;   // |m0|
  double prototype_jitter = 0.3;  // spread of mu_g around its class prototype
  double label_noise = 0.05;
  // Explicit influence edges; when empty, `n_planted` edges with coefficient
  // `planted_coef` are drawn from distinct sources to distinct targets.
  std::vector<PlantedEdge> planted;
  std::size_t n_planted = 0;
  double planted_coef = 0.8;
  bool peripheral_targets = true;
  double train_fraction = 0.6;
  double val_fraction = 0.2;
  std::size_t burn_in = 50;
  std::uint64_t seed = 0;

  // Throws ContractViolation for inconsistent sizes, coefficients outside
  // (-1, 1) or an unstable VAR (|a| + sum of incoming |c| >= 1).
  void validate() const;
};

struct SynthResult {
  Dataset dataset;
  std::vector<PlantedEdge> truth;  // sorted by (src, dst)
  std::vector<int> community;      // -1 for peripheral nodes
  std::vector<std::string> diagnostics;
};

SynthResult generate(const SynthConfig& cfg);

// "toy", "small" or "medium". Throws ContractViolation for other names.
SynthConfig preset(const std::string& name);
std::vector<std::string> preset_names();

// {"true_edges":[{"src":id,"dst":id,"coef":c}]}
std::string truth_to_json(const std::vector<PlantedEdge>& truth,
                          const std::vector<std::string>& node_ids);
std::vector<PlantedEdge> truth_from_json(const std::string& text,
                                         const std::vector<std::string>& node_ids);

}  // namespace csphhn::synth

#endif  // CSPHHN_SYNTHGEN_HPP_
