#ifndef CSPHHN_GRANGER_HPP_
#define CSPHHN_GRANGER_HPP_

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "csphhn/hypergraph.hpp"
#include "csphhn/linalg.hpp"

// Pairwise Granger causality between scalar series: does adding p lags of a
// source series to an AR(p) model of the target reduce the residual variance
// significantly (F-test)?
namespace csphhn::granger {

struct GrangerConfig {
  int lag = 2;
  double alpha = 0.01;
  // Divide alpha by the number of ordered pairs tested.
  bool bonferroni = false;

  std::size_t min_length() const { return static_cast<std::size_t>(lag) * 4 + 4; }
  void validate() const;
};

struct VarFit {
  Vector coefficients;  // intercept, own lags 1..p, then source lags 1..p
  double rss = 0.0;
  long dof = 0;
};

// OLS of y_t on (1, y_{t-1}, ..., y_{t-p}). A constant series is predicted
// exactly by the intercept and returns rss = 0 without a solve.
VarFit fit_var_restricted(std::span<const double> y, int lag);

// OLS of y_t on (1, y lags, x lags).
VarFit fit_var_unrestricted(std::span<const double> y,
                            std::span<const double> x, int lag);

// F statistics are capped here so noiseless fits stay finite downstream
// (the p-value is already 0 long before this).
inline constexpr double kMaxFStatistic = 1e12;

struct TestResult {
  double f_statistic = 0.0;
  double p_value = 1.0;
  bool is_edge = false;
  // Non-empty when the test degenerated (short series, collinear design).
  std::string diagnostic;
};

// Does `source` Granger-cause `target`? Degenerate designs yield no edge.
TestResult granger_test(std::span<const double> source,
                        std::span<const double> target,
                        const GrangerConfig& cfg);

struct CausalEdge {
  std::size_t src = 0;
  std::size_t dst = 0;
  double f_statistic = 0.0;
  double p_value = 1.0;

  friend bool operator==(const CausalEdge&, const CausalEdge&) = default;
};

struct CausalGraph {
  double alpha = 0.01;
  int lag = 2;
  std::vector<CausalEdge> edges;  // sorted by (src, dst)

  struct Parent {
    std::size_t node;
    double f_statistic;
  };
  // parents()[i] lists the sources of edges into i, ordered by source.
  std::vector<std::vector<Parent>> parents(std::size_t node_count) const;

  // No self loops, no duplicates, sorted, p <= alpha, F >= 0.
  void validate(std::size_t node_count) const;

  friend bool operator==(const CausalGraph&, const CausalGraph&) = default;
};

enum class FeatureReduction { kPca1, kMean };

FeatureReduction parse_reduction(const std::string& name);
std::string to_string(FeatureReduction mode);

// Collapses each node's T x d features to a scalar series. kPca1 projects on
// the leading principal axis of the rows of `fit_nodes` (pooled over time);
// kMean averages the features.
std::vector<Vector> reduce_features(const Dataset& ds,
                                    std::span<const std::size_t> fit_nodes,
                                    FeatureReduction mode);

// Tests every ordered pair i != j. Pairs are distributed over `threads`
// workers (0 = hardware concurrency); the result does not depend on it.
CausalGraph infer_causal_graph(const std::vector<Vector>& series,
                               const GrangerConfig& cfg,
                               unsigned threads = 0);

// Reduction fitted on the training split, then infer_causal_graph.
CausalGraph infer_causal_graph(const Dataset& ds, const GrangerConfig& cfg,
                               FeatureReduction mode, unsigned threads = 0);

// {"alpha":..,"lag":..,"edges":[{"src":id,"dst":id,"f":..,"p":..}]}
std::string graph_to_json(const CausalGraph& g,
                          const std::vector<std::string>& node_ids);
CausalGraph graph_from_json(const std::string& text,
                            const std::vector<std::string>& node_ids);

// Regularized incomplete beta I_x(a, b), continued-fraction evaluation.
double regularized_incomplete_beta(double a, double b, double x);

// P[F(d1, d2) > f].
double f_survival(double f, double d1, double d2);

}  // namespace csphhn::granger

#endif  // CSPHHN_GRANGER_HPP_
