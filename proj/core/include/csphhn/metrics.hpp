#ifndef CSPHHN_METRICS_HPP_
#define CSPHHN_METRICS_HPP_

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "csphhn/linalg.hpp"
#include "csphhn/model.hpp"

namespace csphhn::metrics {

inline constexpr std::size_t kDefaultEceBins = 10;
inline constexpr std::size_t kDefaultTopK = 5;

double accuracy(std::span<const int> preds, std::span<const int> labels);

// Per-class F1; a class absent from both predictions and labels scores 0.
std::vector<double> per_class_f1(std::span<const int> preds,
                                 std::span<const int> labels, std::size_t classes);

double macro_f1(std::span<const int> preds, std::span<const int> labels,
                std::size_t classes);

// Macro one-vs-rest ROC AUC via the Mann-Whitney statistic with midranks.
// Classes without positives or without negatives are skipped; nullopt when
// every class is skipped.
std::optional<double> auc_ovr(const std::vector<Vector>& probs,
                              std::span<const int> labels, std::size_t classes);

// Expected calibration error over equal-width confidence bins on [0, 1].
double ece(const std::vector<Vector>& probs, std::span<const int> labels,
           std::size_t bins = kDefaultEceBins);

// Mean Shannon entropy (nats) of the predictive distributions.
double mean_entropy(const std::vector<Vector>& probs);

std::vector<int> argmax_rows(const std::vector<Vector>& probs);

struct ScoredEdge {
  std::size_t src = 0;
  std::size_t dst = 0;
  double score = 0.0;
};

struct EdgeKey {
  std::size_t src = 0;
  std::size_t dst = 0;
  friend auto operator<=>(const EdgeKey&, const EdgeKey&) = default;
};

struct PrecisionAtK {
  double precision = 0.0;
  std::size_t evaluated = 0;  // min(K, candidates)
  std::string diagnostic;     // set when fewer than K candidates exist
};

// Fraction of the K highest-scored edges that are true. Ties break by
// ascending (src, dst).
PrecisionAtK precision_at_k(std::vector<ScoredEdge> scored,
                            const std::vector<EdgeKey>& truth,
                            std::size_t k = kDefaultTopK);

// Causal edge scores of a forward pass: the causal attention logit gamma * F
// for every (parent, node) pair the model attends over and 0 for every other
// ordered pair, so all N(N-1) candidates are ranked.
std::vector<ScoredEdge> causal_edge_scores(const ModelInputs& inputs,
                                           const ForwardTrace& trace);

// Paired causal attention weights: the model's gamma_ij and the reference
// softmax of the F statistics over the same parents, flattened in node order.
struct AttentionAlignment {
  std::vector<double> model;
  std::vector<double> reference;
};
AttentionAlignment causal_attention_alignment(const ModelInputs& inputs,
                                              const ForwardTrace& trace);

// Spearman rank correlation with midranks; nullopt when either list has
// zero variance.
std::optional<double> rank_correlation(std::span<const double> a,
                                       std::span<const double> b);

// 1-based midranks.
std::vector<double> midranks(std::span<const double> values);

struct EvalReport {
  double accuracy = 0.0;
  double macro_f1 = 0.0;
  std::optional<double> auc;
  double ece = 0.0;
  double mean_entropy = 0.0;
  std::map<std::size_t, double> p_at_k;
  std::optional<double> spearman;
  std::vector<double> per_class_f1;
  std::size_t ece_bins = kDefaultEceBins;
  std::size_t evaluated_nodes = 0;
  std::vector<std::string> diagnostics;
};

// Classification metrics over the rows of `probs` listed in `nodes`.
EvalReport classification_report(const std::vector<Vector>& probs,
                                  std::span<const int> labels,
                                  std::span<const std::size_t> nodes,
                                  std::size_t classes,
                                  std::size_t bins = kDefaultEceBins);

}  // namespace csphhn::metrics

#endif  // CSPHHN_METRICS_HPP_
