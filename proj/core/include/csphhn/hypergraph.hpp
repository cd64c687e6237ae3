#ifndef CSPHHN_HYPERGRAPH_HPP_
#define CSPHHN_HYPERGRAPH_HPP_

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include "csphhn/linalg.hpp"
#include "csphhn/rng.hpp"

namespace csphhn {

// Features of one node over time, one row per timestep (T x d).
struct NodeFeatureSeries {
  std::string id;
  Matrix features;

  friend bool operator==(const NodeFeatureSeries&,
                         const NodeFeatureSeries&) = default;
};

// A shared context. Members are node indices into Dataset::nodes.
struct Hyperedge {
  std::string id;
  std::vector<std::size_t> members;
  std::string context_type;

  friend bool operator==(const Hyperedge&, const Hyperedge&) = default;
};

struct Splits {
  std::vector<std::size_t> train;
  std::vector<std::size_t> val;
  std::vector<std::size_t> test;

  friend bool operator==(const Splits&, const Splits&) = default;
};

// Static hypergraph with time-indexed node features and one categorical
// label per node, `horizon` steps past the last observed timestep.
struct Dataset {
  std::size_t dim = 0;
  std::size_t timesteps = 0;
  std::size_t classes = 0;
  std::size_t horizon = 1;
  std::vector<NodeFeatureSeries> nodes;
  std::vector<Hyperedge> hyperedges;
  std::vector<int> labels;  // labels[i] belongs to nodes[i]
  Splits splits;

  std::size_t node_count() const { return nodes.size(); }

  // Sorted distinct context types; a hyperedge's type index is its position.
  std::vector<std::string> context_types() const;

  // Throws ValidationError (or DanglingReference) on any broken invariant.
  void validate() const;

  friend bool operator==(const Dataset&, const Dataset&) = default;
};

// node -> incident hyperedges and hyperedge -> members, both ordered by index.
struct IncidenceIndex {
  std::vector<std::vector<std::size_t>> node_edges;
  std::vector<std::vector<std::size_t>> edge_nodes;
};

// O(sum |e|). Throws DanglingReference for member ids outside the node set.
IncidenceIndex build_index(const Dataset& ds);

// JSON document (see README for the schema). Doubles are written with
// round-trip precision.
std::string dataset_to_json(const Dataset& ds);
Dataset dataset_from_json(const std::string& text);

Dataset load_dataset(const std::filesystem::path& path);
void save_dataset(const Dataset& ds, const std::filesystem::path& path);

// Zeroes each feature entry independently with probability `rate`.
Dataset feature_dropout(const Dataset& ds, double rate, Rng& rng);

// Replaces every hyperedge by the 2-cliques of its members (same type).
Dataset expand_to_pairwise(const Dataset& ds);

// Stable digest of the serialized dataset.
std::string dataset_digest(const Dataset& ds);

}  // namespace csphhn

#endif  // CSPHHN_HYPERGRAPH_HPP_
