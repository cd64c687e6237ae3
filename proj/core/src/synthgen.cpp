#include "csphhn/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <set>
#include <unordered_map>

#include "csphhn/errors.hpp"
#include "json.hpp"

namespace csphhn::synth {
namespace {

using nlohmann::json;

Vector RandomUnit(std::size_t dim, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Vector v(dim);
  double n = 0.0;
  while (n < 1e-6) {
    for (double& x : v) x = normal(rng);
    n = norm2(v);
  }
  for (double& x : v) x /= n;
  return v;
}

std::string PaddedId(char prefix, std::size_t i, std::size_t count) {
  std::size_t width = 4;
  for (std::size_t c = count; c >= 10000; c /= 10) ++width;
  std::string digits = std::to_string(i);
  if (digits.size() < width) digits.insert(0, width - digits.size(), '0');
  return prefix + digits;
}

std::vector<PlantedEdge> SortedEdges(std::vector<PlantedEdge> edges) {
  std::sort(edges.begin(), edges.end(), [](const PlantedEdge& a, const PlantedEdge& b) {
    return a.src != b.src ? a.src < b.src : a.dst < b.dst;
  });
  return edges;
}

// Flags directed cycles among the planted edges.
bool HasCycle(const std::vector<PlantedEdge>& edges, std::size_t n) {
  std::vector<std::vector<std::size_t>> out(n);
  std::vector<std::size_t> indeg(n, 0);
  for (const auto& e : edges) {
    out[e.src].push_back(e.dst);
    ++indeg[e.dst];
  }
  std::vector<std::size_t> queue;
  for (std::size_t i = 0; i < n; ++i)
    if (indeg[i] == 0) queue.push_back(i);
  std::size_t seen = 0;
  while (!queue.empty()) {
    const std::size_t u = queue.back();
    queue.pop_back();
    ++seen;
    for (std::size_t v : out[u])
      if (--indeg[v] == 0) queue.push_back(v);
  }
  return seen != n;
}

}  // namespace

void SynthConfig::validate() const {
  CSPHHN_REQUIRE(n_nodes >= 2, "SynthConfig: n_nodes must be >= 2");
  CSPHHN_REQUIRE(dim >= 1, "SynthConfig: dim must be >= 1");
  CSPHHN_REQUIRE(classes >= 2, "SynthConfig: classes must be >= 2");
  CSPHHN_REQUIRE(horizon >= 1, "SynthConfig: horizon must be >= 1");
  CSPHHN_REQUIRE(timesteps >= 8, "SynthConfig: timesteps must be >= 4 * lag (8)");
  CSPHHN_REQUIRE(communities >= 1, "SynthConfig: communities must be >= 1");
  CSPHHN_REQUIRE(context_types >= 1, "SynthConfig: context_types must be >= 1");
  CSPHHN_REQUIRE(mean_edge_size >= 2.0, "SynthConfig: mean_edge_size must be >= 2");
  CSPHHN_REQUIRE(community_mixing >= 0.0 && community_mixing <= 1.0,
                 "SynthConfig: community_mixing must lie in [0, 1]");
  CSPHHN_REQUIRE(label_noise >= 0.0 && label_noise < 1.0,
                 "SynthConfig: label_noise must lie in [0, 1)");
  CSPHHN_REQUIRE(noise_sigma > 0.0, "SynthConfig: noise_sigma must be > 0");
  CSPHHN_REQUIRE(signal_strength >= 0.0 && baseline_offset >= 0.0 &&
                     prototype_jitter >= 0.0,
                 "SynthConfig: signal_strength, baseline_offset and "
                 "prototype_jitter must be >= 0");
  CSPHHN_REQUIRE(train_fraction > 0.0 && val_fraction >= 0.0 &&
                     train_fraction + val_fraction <= 1.0,
                 "SynthConfig: invalid split fractions");
  CSPHHN_REQUIRE(std::abs(self_coef) < 1.0, "SynthConfig: self_coef must lie in (-1, 1)");
  CSPHHN_REQUIRE(std::abs(planted_coef) < 1.0,
                 "SynthConfig: planted_coef must lie in (-1, 1)");

  std::vector<double> inflow(n_nodes, std::abs(self_coef));
  std::set<std::pair<std::size_t, std::size_t>> seen;
  for (const auto& e : planted) {
    CSPHHN_REQUIRE(e.src < n_nodes && e.dst < n_nodes,
                   "SynthConfig: planted edge references a node outside n_nodes");
    CSPHHN_REQUIRE(e.src != e.dst, "SynthConfig: planted self loop");
    CSPHHN_REQUIRE(std::abs(e.coef) < 1.0,
                   "SynthConfig: planted coefficient must lie in (-1, 1)");
    CSPHHN_REQUIRE(seen.insert({e.src, e.dst}).second,
                   "SynthConfig: duplicate planted edge");
    inflow[e.dst] += std::abs(e.coef);
  }
  for (std::size_t i = 0; i < n_nodes; ++i) {
    CSPHHN_REQUIRE(inflow[i] < 1.0, "SynthConfig: unstable dynamics at node " +
                                        std::to_string(i) +
                                        " (|a| + sum |c| >= 1)");
  }
  if (planted.empty() && n_planted > 0) {
    CSPHHN_REQUIRE(std::abs(self_coef) + std::abs(planted_coef) < 1.0,
                   "SynthConfig: unstable dynamics (|a| + |c| >= 1)");
    CSPHHN_REQUIRE(2 * n_planted + communities <= n_nodes,
                   "SynthConfig: too many planted edges for n_nodes");
  }
  CSPHHN_REQUIRE(communities <= n_nodes, "SynthConfig: more communities than nodes");
}

SynthResult generate(const SynthConfig& cfg) {
  cfg.validate();
  Rng rng = make_rng(cfg.seed, "synth");
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  const std::size_t n = cfg.n_nodes;
  const std::size_t d = cfg.dim;

  std::vector<Vector> prototypes;
  for (std::size_t c = 0; c < cfg.classes; ++c) prototypes.push_back(RandomUnit(d, rng));
  Vector baseline = RandomUnit(d, rng);
  for (double& v : baseline) v *= cfg.baseline_offset;

  std::vector<Vector> community_dir(cfg.communities);
  for (std::size_t g = 0; g < cfg.communities; ++g) {
    Vector v = prototypes[g % cfg.classes];
    const Vector jitter = RandomUnit(d, rng);
    axpy(cfg.prototype_jitter, jitter, v);
    const double len = norm2(v);
    for (double& x : v) x /= len;
    community_dir[g] = std::move(v);
  }

  SynthResult out;
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);

  std::vector<PlantedEdge> planted = cfg.planted;
  std::vector<bool> peripheral(n, false);
  std::size_t first_member = 0;
  if (planted.empty() && cfg.n_planted > 0) {
    // order[0, k) are targets, order[k, 2k) their sources.
    const std::size_t k = cfg.n_planted;
    for (std::size_t e = 0; e < k; ++e) {
      planted.push_back({order[k + e], order[e], cfg.planted_coef});
      if (cfg.peripheral_targets) peripheral[order[e]] = true;
    }
    if (cfg.peripheral_targets) first_member = k;
  }
  planted = SortedEdges(std::move(planted));
  if (HasCycle(planted, n)) {
    out.diagnostics.push_back("planted edges contain a directed cycle across lags");
  }

  // Round-robin community assignment over the shuffled non-peripheral nodes.
  std::vector<int> community(n, -1);
  std::vector<std::vector<std::size_t>> members(cfg.communities);
  for (std::size_t r = first_member; r < n; ++r) {
    const std::size_t i = order[r];
    const std::size_t g = (r - first_member) % cfg.communities;
    community[i] = static_cast<int>(g);
    members[g].push_back(i);
  }
  for (auto& m : members) std::sort(m.begin(), m.end());

  std::vector<Vector> offset(n, baseline);
  for (std::size_t i = 0; i < n; ++i) {
    if (community[i] >= 0) axpy(cfg.signal_strength, community_dir[community[i]], offset[i]);
  }

  std::vector<std::vector<const PlantedEdge*>> incoming(n);
  for (const auto& e : planted) incoming[e.dst].push_back(&e);

  // Simulate burn_in + T - 1 + horizon transitions of the fluctuation s.
  const std::size_t total = cfg.burn_in + cfg.timesteps - 1 + cfg.horizon;
  std::vector<Vector> s(n, Vector(d, 0.0));
  std::vector<Vector> next(n, Vector(d, 0.0));
  std::vector<Matrix> features(n, Matrix(cfg.timesteps, d));
  auto record = [&](std::size_t step) {
    if (step < cfg.burn_in || step >= cfg.burn_in + cfg.timesteps) return;
    const std::size_t t = step - cfg.burn_in;
    for (std::size_t i = 0; i < n; ++i) {
      auto row = features[i].row(t);
      for (std::size_t k = 0; k < d; ++k) row[k] = offset[i][k] + s[i][k];
    }
  };
  for (std::size_t i = 0; i < n; ++i)
    for (double& v : s[i]) v = cfg.noise_sigma * normal(rng);
  record(0);
  for (std::size_t step = 1; step <= total; ++step) {
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t k = 0; k < d; ++k) {
        double v = cfg.self_coef * s[i][k] + cfg.noise_sigma * normal(rng);
        for (const PlantedEdge* e : incoming[i]) v += e->coef * s[e->src][k];
        next[i][k] = v;
      }
    }
    std::swap(s, next);
    record(step);
  }

  // Community labels from the mean direction at the target step.
  std::vector<int> community_label(cfg.communities, 0);
  for (std::size_t g = 0; g < cfg.communities; ++g) {
    if (members[g].empty()) continue;
    Vector mean(d, 0.0);
    for (std::size_t i : members[g]) {
      for (std::size_t k = 0; k < d; ++k) mean[k] += offset[i][k] - baseline[k] + s[i][k];
    }
    int best = 0;
    double best_score = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < cfg.classes; ++c) {
      const double score = dot(prototypes[c], mean);
      if (score > best_score) {
        best_score = score;
        best = static_cast<int>(c);
      }
    }
    community_label[g] = best;
  }

  Dataset& ds = out.dataset;
  ds.dim = d;
  ds.timesteps = cfg.timesteps;
  ds.classes = cfg.classes;
  ds.horizon = cfg.horizon;
  ds.nodes.resize(n);
  ds.labels.assign(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    ds.nodes[i].id = PaddedId('n', i, n);
    ds.nodes[i].features = std::move(features[i]);
    if (community[i] >= 0) {
      ds.labels[i] = community_label[community[i]];
    } else {
      // Peripheral: inherit from the first source with a community.
      for (const PlantedEdge* e : incoming[i]) {
        if (community[e->src] >= 0) {
          ds.labels[i] = community_label[community[e->src]];
          break;
        }
      }
    }
  }
  std::uniform_int_distribution<int> other(1, static_cast<int>(cfg.classes) - 1);
  for (std::size_t i = 0; i < n; ++i) {
    if (uniform(rng) < cfg.label_noise) {
      ds.labels[i] = (ds.labels[i] + other(rng)) % static_cast<int>(cfg.classes);
    }
  }

  // Hyperedges, mostly within one community.
  std::vector<std::size_t> pool;
  for (std::size_t i = 0; i < n; ++i)
    if (!peripheral[i]) pool.push_back(i);
  std::vector<std::size_t> homes;
  for (std::size_t g = 0; g < cfg.communities; ++g)
    if (members[g].size() >= 2) homes.push_back(g);
  if (homes.empty() && cfg.n_hyperedges > 0) {
    out.diagnostics.push_back("no community has two members; no hyperedges generated");
  }
  std::poisson_distribution<int> extra(std::max(cfg.mean_edge_size - 2.0, 1e-12));
  for (std::size_t e = 0; e < cfg.n_hyperedges && !homes.empty(); ++e) {
    const std::size_t g = homes[std::uniform_int_distribution<std::size_t>(
        0, homes.size() - 1)(rng)];
    const std::size_t size =
        std::min<std::size_t>(2 + static_cast<std::size_t>(extra(rng)),
                              std::min(members[g].size(), pool.size()));
    std::set<std::size_t> chosen;
    std::size_t attempts = 0;
    while (chosen.size() < size && attempts < 100 * size) {
      ++attempts;
      const auto& from = uniform(rng) < cfg.community_mixing ? pool : members[g];
      chosen.insert(from[std::uniform_int_distribution<std::size_t>(0, from.size() - 1)(rng)]);
    }
    if (chosen.size() < 2) continue;
    Hyperedge h;
    h.id = PaddedId('e', ds.hyperedges.size(), cfg.n_hyperedges);
    h.members.assign(chosen.begin(), chosen.end());
    h.context_type = "ctx" + std::to_string(std::uniform_int_distribution<std::size_t>(
                                 0, cfg.context_types - 1)(rng));
    ds.hyperedges.push_back(std::move(h));
  }

  std::vector<std::size_t> split(n);
  std::iota(split.begin(), split.end(), 0);
  std::shuffle(split.begin(), split.end(), rng);
  const auto n_train = static_cast<std::size_t>(std::llround(cfg.train_fraction * n));
  const auto n_val = std::min(n - n_train,
                              static_cast<std::size_t>(std::llround(cfg.val_fraction * n)));
  ds.splits.train.assign(split.begin(), split.begin() + n_train);
  ds.splits.val.assign(split.begin() + n_train, split.begin() + n_train + n_val);
  ds.splits.test.assign(split.begin() + n_train + n_val, split.end());
  std::sort(ds.splits.train.begin(), ds.splits.train.end());
  std::sort(ds.splits.val.begin(), ds.splits.val.end());
  std::sort(ds.splits.test.begin(), ds.splits.test.end());

  ds.validate();
  out.truth = std::move(planted);
  out.community = std::move(community);
  return out;
}

SynthConfig preset(const std::string& name) {
  SynthConfig cfg;
  // A strong shared baseline keeps raw features of different communities
  // close in angle, so the signal sits in small directional offsets.
  cfg.signal_strength = 2.0;
  cfg.baseline_offset = 15.0;
  if (name == "toy") {
    cfg.n_nodes = 40;
    cfg.n_hyperedges = 120;
    cfg.classes = 4;
    cfg.communities = 4;
    cfg.dim = 16;
    cfg.timesteps = 64;
    cfg.n_planted = 4;
    cfg.seed = 7;
  } else if (name == "small") {
    cfg.n_nodes = 540;
    cfg.n_hyperedges = 1120;
    cfg.classes = 3;
    cfg.communities = 18;
    cfg.dim = 24;
    cfg.timesteps = 128;
    cfg.n_planted = 20;
    cfg.seed = 11;
  } else if (name == "medium") {
    cfg.n_nodes = 1000;
    cfg.n_hyperedges = 2000;
    cfg.classes = 4;
    cfg.communities = 40;
    cfg.dim = 32;
    cfg.timesteps = 128;
    cfg.n_planted = 30;
    cfg.seed = 13;
  } else {
    throw ContractViolation("unknown synthetic preset '" + name +
                            "' (expected toy, small or medium)");
  }
  return cfg;
}

std::vector<std::string> preset_names() { return {"toy", "small", "medium"}; }

std::string truth_to_json(const std::vector<PlantedEdge>& truth,
                          const std::vector<std::string>& node_ids) {
  json edges = json::array();
  for (const auto& e : truth) {
    CSPHHN_REQUIRE(e.src < node_ids.size() && e.dst < node_ids.size(),
                   "truth_to_json: edge references an unknown node");
    edges.push_back({{"src", node_ids[e.src]}, {"dst", node_ids[e.dst]}, {"coef", e.coef}});
  }
  return json{{"true_edges", edges}}.dump(1) + "\n";
}

std::vector<PlantedEdge> truth_from_json(const std::string& text,
                                         const std::vector<std::string>& node_ids) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("truth JSON: ") + e.what());
  }
  std::unordered_map<std::string, std::size_t> index_of;
  for (std::size_t i = 0; i < node_ids.size(); ++i) index_of[node_ids[i]] = i;
  std::vector<PlantedEdge> out;
  try {
    for (const auto& e : doc.at("true_edges")) {
      const auto src = e.at("src").get<std::string>();
      const auto dst = e.at("dst").get<std::string>();
      const auto s = index_of.find(src);
      const auto t = index_of.find(dst);
      if (s == index_of.end() || t == index_of.end()) {
        throw DanglingReference("truth: edge " + src + "->" + dst +
                                " references an unknown node");
      }
      out.push_back({s->second, t->second, e.at("coef").get<double>()});
    }
  } catch (const json::exception& e) {
    throw ParseError(std::string("truth JSON: ") + e.what());
  }
  return SortedEdges(std::move(out));
}

}  // namespace csphhn::synth
