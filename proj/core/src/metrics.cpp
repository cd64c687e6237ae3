#include "csphhn/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "csphhn/errors.hpp"

namespace csphhn::metrics {
namespace {

void CheckLabels(std::span<const int> labels, std::size_t classes) {
  for (int y : labels) {
    CSPHHN_REQUIRE(y >= 0 && static_cast<std::size_t>(y) < classes,
                   "label " + std::to_string(y) + " out of range");
  }
}

}  // namespace

double accuracy(std::span<const int> preds, std::span<const int> labels) {
  CSPHHN_REQUIRE(!labels.empty(), "accuracy: empty input");
  CSPHHN_REQUIRE(preds.size() == labels.size(), "accuracy: length mismatch");
  std::size_t hit = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) hit += preds[i] == labels[i];
  return static_cast<double>(hit) / static_cast<double>(labels.size());
}

std::vector<double> per_class_f1(std::span<const int> preds,
                                 std::span<const int> labels, std::size_t classes) {
  CSPHHN_REQUIRE(!labels.empty(), "macro_f1: empty input");
  CSPHHN_REQUIRE(preds.size() == labels.size(), "macro_f1: length mismatch");
  CSPHHN_REQUIRE(classes >= 1, "macro_f1: classes must be >= 1");
  CheckLabels(labels, classes);
  CheckLabels(preds, classes);
  std::vector<double> tp(classes, 0.0), fp(classes, 0.0), fn(classes, 0.0);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (preds[i] == labels[i]) {
      tp[labels[i]] += 1.0;
    } else {
      fp[preds[i]] += 1.0;
      fn[labels[i]] += 1.0;
    }
  }
  std::vector<double> f1(classes, 0.0);
  for (std::size_t c = 0; c < classes; ++c) {
    const double denom = 2.0 * tp[c] + fp[c] + fn[c];
    f1[c] = denom > 0.0 ? 2.0 * tp[c] / denom : 0.0;
  }
  return f1;
}

double macro_f1(std::span<const int> preds, std::span<const int> labels,
                std::size_t classes) {
  const auto f1 = per_class_f1(preds, labels, classes);
  return std::accumulate(f1.begin(), f1.end(), 0.0) / static_cast<double>(classes);
}

std::vector<double> midranks(std::span<const double> values) {
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(values.size());
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j + 1 < order.size() && values[order[j + 1]] == values[order[i]]) ++j;
    const double rank = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = rank;
    i = j + 1;
  }
  return ranks;
}

std::optional<double> auc_ovr(const std::vector<Vector>& probs,
                              std::span<const int> labels, std::size_t classes) {
  CSPHHN_REQUIRE(!labels.empty(), "auc_ovr: empty input");
  CSPHHN_REQUIRE(probs.size() == labels.size(), "auc_ovr: length mismatch");
  CheckLabels(labels, classes);
  double total = 0.0;
  std::size_t used = 0;
  Vector scores(labels.size());
  for (std::size_t c = 0; c < classes; ++c) {
    double pos = 0.0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      CSPHHN_REQUIRE(probs[i].size() == classes, "auc_ovr: probability row width");
      scores[i] = probs[i][c];
      pos += labels[i] == static_cast<int>(c);
    }
    const double neg = static_cast<double>(labels.size()) - pos;
    if (pos == 0.0 || neg == 0.0) continue;
    const auto ranks = midranks(scores);
    double rank_sum = 0.0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (labels[i] == static_cast<int>(c)) rank_sum += ranks[i];
    }
    total += (rank_sum - pos * (pos + 1.0) / 2.0) / (pos * neg);
    ++used;
  }
  if (used == 0) return std::nullopt;
  return total / static_cast<double>(used);
}

double ece(const std::vector<Vector>& probs, std::span<const int> labels,
           std::size_t bins) {
  CSPHHN_REQUIRE(probs.size() == labels.size(), "ece: length mismatch");
  CSPHHN_REQUIRE(bins >= 1, "ece: bins must be >= 1");
  if (labels.empty()) return 0.0;
  std::vector<double> count(bins, 0.0), conf_sum(bins, 0.0), hit(bins, 0.0);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const Vector& p = probs[i];
    CSPHHN_REQUIRE(!p.empty(), "ece: empty probability row");
    const auto best = std::max_element(p.begin(), p.end());
    const double conf = *best;
    const int pred = static_cast<int>(best - p.begin());
    const auto b = std::min(static_cast<std::size_t>(
                                std::floor(std::clamp(conf, 0.0, 1.0) * bins)),
                            bins - 1);
    count[b] += 1.0;
    conf_sum[b] += conf;
    hit[b] += pred == labels[i];
  }
  double out = 0.0;
  for (std::size_t b = 0; b < bins; ++b) {
    if (count[b] == 0.0) continue;
    out += std::abs(hit[b] - conf_sum[b]);
  }
  return out / static_cast<double>(labels.size());
}

double mean_entropy(const std::vector<Vector>& probs) {
  if (probs.empty()) return 0.0;
  double total = 0.0;
  for (const auto& p : probs) {
    for (double v : p) {
      if (v > 0.0) total -= v * std::log(v);
    }
  }
  return total / static_cast<double>(probs.size());
}

std::vector<int> argmax_rows(const std::vector<Vector>& probs) {
  std::vector<int> out(probs.size());
  for (std::size_t i = 0; i < probs.size(); ++i) {
    CSPHHN_REQUIRE(!probs[i].empty(), "argmax_rows: empty row");
    out[i] = static_cast<int>(std::max_element(probs[i].begin(), probs[i].end()) -
                              probs[i].begin());
  }
  return out;
}

PrecisionAtK precision_at_k(std::vector<ScoredEdge> scored,
                            const std::vector<EdgeKey>& truth, std::size_t k) {
  CSPHHN_REQUIRE(k >= 1, "precision_at_k: K must be >= 1");
  std::sort(scored.begin(), scored.end(), [](const ScoredEdge& a, const ScoredEdge& b) {
    if (a.score != b.score) return a.score > b.score;
    if (a.src != b.src) return a.src < b.src;
    return a.dst < b.dst;
  });
  PrecisionAtK out;
  out.evaluated = std::min(k, scored.size());
  if (scored.size() < k) {
    out.diagnostic = "only " + std::to_string(scored.size()) +
                     " candidate edges for K=" + std::to_string(k);
  }
  if (out.evaluated == 0) return out;
  const std::set<EdgeKey> true_set(truth.begin(), truth.end());
  std::size_t hits = 0;
  for (std::size_t i = 0; i < out.evaluated; ++i) {
    hits += true_set.count(EdgeKey{scored[i].src, scored[i].dst});
  }
  out.precision = static_cast<double>(hits) / static_cast<double>(out.evaluated);
  return out;
}

std::optional<double> rank_correlation(std::span<const double> a,
                                       std::span<const double> b) {
  CSPHHN_REQUIRE(a.size() == b.size(), "rank_correlation: length mismatch");
  CSPHHN_REQUIRE(a.size() >= 2, "rank_correlation: need at least 2 pairs");
  const auto ra = midranks(a);
  const auto rb = midranks(b);
  const double n = static_cast<double>(a.size());
  const double mean = (n + 1.0) / 2.0;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    sab += (ra[i] - mean) * (rb[i] - mean);
    saa += (ra[i] - mean) * (ra[i] - mean);
    sbb += (rb[i] - mean) * (rb[i] - mean);
  }
  if (saa == 0.0 || sbb == 0.0) return std::nullopt;
  return sab / std::sqrt(saa * sbb);
}

EvalReport classification_report(const std::vector<Vector>& probs,
                                 std::span<const int> labels,
                                 std::span<const std::size_t> nodes,
                                 std::size_t classes, std::size_t bins) {
  CSPHHN_REQUIRE(!nodes.empty(), "classification_report: no nodes to evaluate");
  std::vector<Vector> p;
  std::vector<int> y;
  p.reserve(nodes.size());
  y.reserve(nodes.size());
  for (std::size_t i : nodes) {
    CSPHHN_REQUIRE(i < probs.size() && i < labels.size(),
                   "classification_report: node index out of range");
    p.push_back(probs[i]);
    y.push_back(labels[i]);
  }
  const auto preds = argmax_rows(p);
  EvalReport r;
  r.evaluated_nodes = nodes.size();
  r.ece_bins = bins;
  r.accuracy = accuracy(preds, y);
  r.per_class_f1 = per_class_f1(preds, y, classes);
  r.macro_f1 = std::accumulate(r.per_class_f1.begin(), r.per_class_f1.end(), 0.0) /
               static_cast<double>(classes);
  r.auc = auc_ovr(p, y, classes);
  if (!r.auc) r.diagnostics.push_back("auc undefined: every class is degenerate");
  r.ece = ece(p, y, bins);
  r.mean_entropy = mean_entropy(p);
  return r;
}

std::vector<ScoredEdge> causal_edge_scores(const ModelInputs& inputs,
                                           const ForwardTrace& trace) {
  const std::size_t n = inputs.node_count();
  std::vector<std::vector<std::pair<std::size_t, double>>> by_src(n);
  for (std::size_t dst = 0; dst < n; ++dst) {
    for (const auto& p : inputs.parents[dst]) {
      by_src[p.node].push_back({dst, trace.gamma_temp * p.f_statistic});
    }
  }
  std::vector<ScoredEdge> scored;
  scored.reserve(n * (n - 1));
  for (std::size_t src = 0; src < n; ++src) {
    std::sort(by_src[src].begin(), by_src[src].end());
    std::size_t next = 0;
    for (std::size_t dst = 0; dst < n; ++dst) {
      if (dst == src) continue;
      double score = 0.0;
      if (next < by_src[src].size() && by_src[src][next].first == dst) {
        score = by_src[src][next++].second;
      }
      scored.push_back({src, dst, score});
    }
  }
  return scored;
}

AttentionAlignment causal_attention_alignment(const ModelInputs& inputs,
                                              const ForwardTrace& trace) {
  AttentionAlignment out;
  for (std::size_t dst = 0; dst < inputs.node_count(); ++dst) {
    const auto& parents = inputs.parents[dst];
    if (parents.empty()) continue;
    Vector f(parents.size());
    for (std::size_t k = 0; k < parents.size(); ++k) f[k] = parents[k].f_statistic;
    const Vector ref = softmax_stable(f);
    for (std::size_t k = 0; k < parents.size(); ++k) {
      out.model.push_back(trace.causal_weights[dst][k]);
      out.reference.push_back(ref[k]);
    }
  }
  return out;
}

}  // namespace csphhn::metrics
