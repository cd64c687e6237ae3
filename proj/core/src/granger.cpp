#include "csphhn/granger.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <thread>
#include <unordered_map>

#include "csphhn/errors.hpp"
#include "json.hpp"

namespace csphhn::granger {

using nlohmann::json;

void GrangerConfig::validate() const {
  CSPHHN_REQUIRE(lag >= 1, "GrangerConfig: lag must be >= 1");
  CSPHHN_REQUIRE(alpha > 0.0 && alpha < 1.0,
                 "GrangerConfig: alpha must lie in (0, 1)");
}

namespace {

void RequireLength(std::size_t n, int lag) {
  CSPHHN_REQUIRE(lag >= 1, "VAR fit: lag must be >= 1");
  const std::size_t min_len = static_cast<std::size_t>(lag) * 4 + 4;
  if (n < min_len) {
    throw SeriesTooShort("VAR fit: series of length " + std::to_string(n) +
                         " is shorter than the minimum " +
                         std::to_string(min_len) + " for lag " +
                         std::to_string(lag));
  }
}

// Rows t = lag..T-1 of [1, y_{t-1..t-p}, (x_{t-1..t-p})].
Matrix LagDesign(std::span<const double> y, std::span<const double> x,
                 int lag) {
  const std::size_t p = static_cast<std::size_t>(lag);
  const std::size_t rows = y.size() - p;
  const std::size_t cols = 1 + p + (x.empty() ? 0 : p);
  Matrix a(rows, cols);
  for (std::size_t r = 0; r < rows; ++r) {
    const std::size_t t = r + p;
    a(r, 0) = 1.0;
    for (std::size_t k = 1; k <= p; ++k) a(r, k) = y[t - k];
    if (!x.empty())
      for (std::size_t k = 1; k <= p; ++k) a(r, p + k) = x[t - k];
  }
  return a;
}

VarFit Fit(std::span<const double> y, std::span<const double> x, int lag) {
  const Matrix a = LagDesign(y, x, lag);
  const auto target = y.subspan(static_cast<std::size_t>(lag));
  LeastSquaresFit fit = solve_least_squares(a, target);
  VarFit out;
  out.coefficients = std::move(fit.coefficients);
  out.rss = fit.residual_ss;
  out.dof = static_cast<long>(a.rows()) - static_cast<long>(a.cols());
  return out;
}

bool IsConstant(std::span<const double> y) {
  return std::all_of(y.begin(), y.end(), [&](double v) { return v == y[0]; });
}

TestResult Compare(const VarFit& restricted, const VarFit& unrestricted,
                   int lag, double alpha) {
  TestResult r;
  const double rss_r = restricted.rss;
  const double rss_u = unrestricted.rss;
  if (!(rss_u < rss_r)) return r;
  double f = kMaxFStatistic;
  if (rss_u > 0.0) {
    f = ((rss_r - rss_u) / lag) / (rss_u / static_cast<double>(unrestricted.dof));
    if (!(f < kMaxFStatistic)) f = kMaxFStatistic;
  }
  r.f_statistic = f;
  r.p_value = f_survival(f, lag, static_cast<double>(unrestricted.dof));
  r.is_edge = r.p_value <= alpha;
  return r;
}

double BetaContinuedFraction(double a, double b, double x) {
  constexpr int kMaxIter = 10000;
  constexpr double kEps = 1e-16;
  constexpr double kTiny = 1e-300;
  const double qab = a + b;
  const double qap = a + 1.0;
  const double qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::abs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIter; ++m) {
    const double m2 = 2.0 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < kEps) break;
  }
  return h;
}

}  // namespace

double regularized_incomplete_beta(double a, double b, double x) {
  CSPHHN_REQUIRE(a > 0.0 && b > 0.0, "incomplete beta: a, b must be > 0");
  CSPHHN_REQUIRE(x >= 0.0 && x <= 1.0, "incomplete beta: x must lie in [0,1]");
  if (x == 0.0) return 0.0;
  if (x == 1.0) return 1.0;
  const double log_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                           a * std::log(x) + b * std::log1p(-x);
  if (x < (a + 1.0) / (a + b + 2.0)) {
    return std::exp(log_front) * BetaContinuedFraction(a, b, x) / a;
  }
  return 1.0 - std::exp(log_front) * BetaContinuedFraction(b, a, 1.0 - x) / b;
}

double f_survival(double f, double d1, double d2) {
  CSPHHN_REQUIRE(d1 > 0.0 && d2 > 0.0, "f_survival: degrees of freedom must be > 0");
  if (!(f > 0.0)) return 1.0;
  if (std::isinf(f)) return 0.0;
  // P[F > f] = I_{d2/(d2 + d1 f)}(d2/2, d1/2); for large f the argument is
  // tiny and the direct continued fraction keeps relative accuracy.
  const double x = d2 / (d2 + d1 * f);
  return regularized_incomplete_beta(0.5 * d2, 0.5 * d1, x);
}

VarFit fit_var_restricted(std::span<const double> y, int lag) {
  RequireLength(y.size(), lag);
  CSPHHN_REQUIRE(all_finite(y), "fit_var_restricted: non-finite series");
  if (IsConstant(y)) {
    VarFit fit;
    fit.coefficients.assign(1 + static_cast<std::size_t>(lag), 0.0);
    fit.coefficients[0] = y[0];
    fit.rss = 0.0;
    fit.dof = static_cast<long>(y.size()) - lag - (lag + 1);
    return fit;
  }
  return Fit(y, {}, lag);
}

VarFit fit_var_unrestricted(std::span<const double> y,
                            std::span<const double> x, int lag) {
  RequireLength(y.size(), lag);
  CSPHHN_REQUIRE(x.size() == y.size(),
                 "fit_var_unrestricted: series lengths differ");
  CSPHHN_REQUIRE(all_finite(y) && all_finite(x),
                 "fit_var_unrestricted: non-finite series");
  return Fit(y, x, lag);
}

TestResult granger_test(std::span<const double> source,
                        std::span<const double> target,
                        const GrangerConfig& cfg) {
  cfg.validate();
  CSPHHN_REQUIRE(source.size() == target.size(),
                 "granger_test: series must be aligned (equal length)");
  try {
    const VarFit restricted = fit_var_restricted(target, cfg.lag);
    const VarFit unrestricted = fit_var_unrestricted(target, source, cfg.lag);
    return Compare(restricted, unrestricted, cfg.lag, cfg.alpha);
  } catch (const SeriesTooShort& e) {
    TestResult r;
    r.diagnostic = e.what();
    return r;
  } catch (const RankDeficient& e) {
    TestResult r;
    r.diagnostic = e.what();
    return r;
  }
}

std::vector<std::vector<CausalGraph::Parent>> CausalGraph::parents(
    std::size_t node_count) const {
  std::vector<std::vector<Parent>> out(node_count);
  for (const auto& e : edges) {
    CSPHHN_REQUIRE(e.dst < node_count && e.src < node_count,
                   "CausalGraph::parents: edge outside node range");
    out[e.dst].push_back({e.src, e.f_statistic});
  }
  for (auto& p : out) {
    std::sort(p.begin(), p.end(),
              [](const Parent& a, const Parent& b) { return a.node < b.node; });
  }
  return out;
}

void CausalGraph::validate(std::size_t node_count) const {
  for (std::size_t k = 0; k < edges.size(); ++k) {
    const auto& e = edges[k];
    if (e.src >= node_count || e.dst >= node_count)
      throw ValidationError("causal graph: edge references unknown node");
    if (e.src == e.dst) throw ValidationError("causal graph: self loop");
    if (!(e.f_statistic >= 0.0) || !(e.p_value >= 0.0 && e.p_value <= 1.0))
      throw ValidationError("causal graph: F or p out of range");
    if (e.p_value > alpha)
      throw ValidationError("causal graph: stored edge with p > alpha");
    if (k > 0) {
      const auto& prev = edges[k - 1];
      if (std::pair(prev.src, prev.dst) >= std::pair(e.src, e.dst))
        throw ValidationError("causal graph: edges unsorted or duplicated");
    }
  }
}

FeatureReduction parse_reduction(const std::string& name) {
  if (name == "pca1") return FeatureReduction::kPca1;
  if (name == "mean") return FeatureReduction::kMean;
  throw ContractViolation("unknown feature reduction '" + name +
                          "' (expected pca1 or mean)");
}

std::string to_string(FeatureReduction mode) {
  return mode == FeatureReduction::kPca1 ? "pca1" : "mean";
}

std::vector<Vector> reduce_features(const Dataset& ds,
                                    std::span<const std::size_t> fit_nodes,
                                    FeatureReduction mode) {
  const std::size_t d = ds.dim;
  std::vector<Vector> out(ds.nodes.size(), Vector(ds.timesteps, 0.0));
  if (mode == FeatureReduction::kMean) {
    for (std::size_t i = 0; i < ds.nodes.size(); ++i) {
      const auto& f = ds.nodes[i].features;
      for (std::size_t t = 0; t < f.rows(); ++t) {
        double s = 0.0;
        for (double v : f.row(t)) s += v;
        out[i][t] = s / static_cast<double>(d);
      }
    }
    return out;
  }

  std::vector<std::size_t> fit(fit_nodes.begin(), fit_nodes.end());
  if (fit.empty()) {
    fit.resize(ds.nodes.size());
    for (std::size_t i = 0; i < fit.size(); ++i) fit[i] = i;
  }
  Vector mean(d, 0.0);
  double count = 0.0;
  for (std::size_t i : fit) {
    const auto& f = ds.nodes.at(i).features;
    for (std::size_t t = 0; t < f.rows(); ++t) {
      axpy(1.0, f.row(t), mean);
      count += 1.0;
    }
  }
  for (double& m : mean) m /= count;
  Matrix cov(d, d);
  Vector centered(d);
  for (std::size_t i : fit) {
    const auto& f = ds.nodes[i].features;
    for (std::size_t t = 0; t < f.rows(); ++t) {
      for (std::size_t c = 0; c < d; ++c) centered[c] = f(t, c) - mean[c];
      add_outer(cov, 1.0 / count, centered, centered);
    }
  }

  // Leading eigenvector by power iteration from a fixed, non-symmetric start.
  Vector w(d);
  for (std::size_t c = 0; c < d; ++c) w[c] = 1.0 + static_cast<double>(c) / d;
  double n = norm2(w);
  for (double& v : w) v /= n;
  for (int it = 0; it < 1000; ++it) {
    Vector next = matvec(cov, w);
    n = norm2(next);
    if (n == 0.0) {
      w.assign(d, 0.0);
      w[0] = 1.0;
      break;
    }
    for (double& v : next) v /= n;
    w = std::move(next);
  }
  std::size_t arg = 0;
  for (std::size_t c = 1; c < d; ++c)
    if (std::abs(w[c]) > std::abs(w[arg])) arg = c;
  if (w[arg] < 0.0)
    for (double& v : w) v = -v;

  for (std::size_t i = 0; i < ds.nodes.size(); ++i) {
    const auto& f = ds.nodes[i].features;
    for (std::size_t t = 0; t < f.rows(); ++t) {
      double s = 0.0;
      for (std::size_t c = 0; c < d; ++c) s += w[c] * (f(t, c) - mean[c]);
      out[i][t] = s;
    }
  }
  return out;
}

CausalGraph infer_causal_graph(const std::vector<Vector>& series,
                               const GrangerConfig& cfg, unsigned threads) {
  cfg.validate();
  const std::size_t n = series.size();
  CSPHHN_REQUIRE(n >= 2, "infer_causal_graph: need at least 2 nodes");
  const std::size_t len = series[0].size();
  for (const auto& s : series) {
    CSPHHN_REQUIRE(s.size() == len, "infer_causal_graph: series lengths differ");
    CSPHHN_REQUIRE(all_finite(s), "infer_causal_graph: non-finite series");
  }
  RequireLength(len, cfg.lag);

  const double alpha =
      cfg.bonferroni ? cfg.alpha / (static_cast<double>(n) * (n - 1)) : cfg.alpha;

  // Each worker owns whole targets, so the restricted fit is shared by all
  // sources of that target and no state is shared between workers.
  std::vector<std::vector<CausalEdge>> by_target(n);
  auto work = [&](std::size_t first, std::size_t stride) {
    for (std::size_t dst = first; dst < n; dst += stride) {
      VarFit restricted;
      try {
        restricted = fit_var_restricted(series[dst], cfg.lag);
      } catch (const RankDeficient&) {
        continue;
      }
      for (std::size_t src = 0; src < n; ++src) {
        if (src == dst) continue;
        VarFit unrestricted;
        try {
          unrestricted = fit_var_unrestricted(series[dst], series[src], cfg.lag);
        } catch (const RankDeficient&) {
          continue;
        }
        const TestResult r = Compare(restricted, unrestricted, cfg.lag, alpha);
        if (r.is_edge) by_target[dst].push_back({src, dst, r.f_statistic, r.p_value});
      }
    }
  };

  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, n));
  if (threads <= 1) {
    work(0, 1);
  } else {
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(work, t, threads);
  }

  CausalGraph g;
  g.alpha = alpha;
  g.lag = cfg.lag;
  for (auto& v : by_target)
    for (auto& e : v) g.edges.push_back(e);
  std::sort(g.edges.begin(), g.edges.end(), [](const CausalEdge& a, const CausalEdge& b) {
    return std::pair(a.src, a.dst) < std::pair(b.src, b.dst);
  });
  return g;
}

CausalGraph infer_causal_graph(const Dataset& ds, const GrangerConfig& cfg,
                               FeatureReduction mode, unsigned threads) {
  return infer_causal_graph(reduce_features(ds, ds.splits.train, mode), cfg,
                            threads);
}

std::string graph_to_json(const CausalGraph& g,
                          const std::vector<std::string>& node_ids) {
  json doc;
  doc["alpha"] = g.alpha;
  doc["lag"] = g.lag;
  json edges = json::array();
  for (const auto& e : g.edges) {
    edges.push_back({{"src", node_ids.at(e.src)},
                     {"dst", node_ids.at(e.dst)},
                     {"f", e.f_statistic},
                     {"p", e.p_value}});
  }
  doc["edges"] = std::move(edges);
  return doc.dump(1);
}

CausalGraph graph_from_json(const std::string& text,
                            const std::vector<std::string>& node_ids) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("causal graph JSON: ") + e.what());
  }
  std::unordered_map<std::string, std::size_t> index_of;
  for (std::size_t i = 0; i < node_ids.size(); ++i) index_of[node_ids[i]] = i;
  CausalGraph g;
  try {
    g.alpha = doc.at("alpha").get<double>();
    g.lag = doc.at("lag").get<int>();
    for (const auto& e : doc.at("edges")) {
      CausalEdge edge;
      const auto src = e.at("src").get<std::string>();
      const auto dst = e.at("dst").get<std::string>();
      auto s = index_of.find(src);
      auto d = index_of.find(dst);
      if (s == index_of.end() || d == index_of.end()) {
        throw DanglingReference("causal graph: edge " + src + "->" + dst +
                                " references an unknown node");
      }
      edge.src = s->second;
      edge.dst = d->second;
      edge.f_statistic = e.at("f").get<double>();
      edge.p_value = e.at("p").get<double>();
      g.edges.push_back(edge);
    }
  } catch (const json::exception& e) {
    throw ParseError(std::string("causal graph JSON: ") + e.what());
  }
  g.validate(node_ids.size());
  return g;
}

}  // namespace csphhn::granger
