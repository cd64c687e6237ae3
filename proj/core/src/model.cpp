#include "csphhn/model.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <random>

#include "csphhn/errors.hpp"
#include "csphhn/vmf.hpp"
#include "json.hpp"

namespace csphhn {

namespace {

// Scale of the initial causal projection relative to the identity.
constexpr double kCausalInitScale = 0.5;

Vector UnitE1(std::size_t n) {
  Vector e(n, 0.0);
  e[0] = 1.0;
  return e;
}

// dx = (I - y y^T) dy / |x| for y = x / |x|.
Vector NormalizeBackward(std::span<const double> y, double x_norm,
                         std::span<const double> dy) {
  const double yd = dot(y, dy);
  Vector dx(y.size());
  for (std::size_t k = 0; k < y.size(); ++k) dx[k] = (dy[k] - yd * y[k]) / x_norm;
  return dx;
}

void RequireFinite(std::span<const double> v, const std::string& name) {
  CSPHHN_REQUIRE(all_finite(v), "ModelParams: " + name + " has non-finite entries");
}

}  // namespace

void ModelConfig::validate() const {
  CSPHHN_REQUIRE(input_dim >= 1, "ModelConfig: input_dim must be >= 1");
  CSPHHN_REQUIRE(embed_dim >= 2, "ModelConfig: embed_dim must be >= 2");
  CSPHHN_REQUIRE(classes >= 2, "ModelConfig: classes must be >= 2");
  CSPHHN_REQUIRE(context_types >= 1, "ModelConfig: context_types must be >= 1");
  CSPHHN_REQUIRE(dropout >= 0.0 && dropout < 1.0,
                 "ModelConfig: dropout must lie in [0, 1)");
  CSPHHN_REQUIRE(attn_temp_init > 0.0, "ModelConfig: attn_temp_init must be > 0");
  CSPHHN_REQUIRE(gamma_temp_init > 0.0, "ModelConfig: gamma_temp_init must be > 0");
}

ModelParams ModelParams::Zeros(const ModelConfig& cfg) {
  ModelParams p;
  p.proj_w = Matrix(cfg.embed_dim, cfg.input_dim);
  p.proj_b.assign(cfg.embed_dim, 0.0);
  p.kappa_w.assign(cfg.embed_dim, 0.0);
  p.kappa_b = 0.0;
  p.edge_w.assign(cfg.context_types, Matrix(cfg.embed_dim, cfg.embed_dim));
  p.attn_temp = 0.0;
  p.causal_w = Matrix(cfg.embed_dim, cfg.embed_dim);
  p.gamma_temp = 0.0;
  p.head_w = Matrix(cfg.classes, cfg.embed_dim);
  p.head_b.assign(cfg.classes, 0.0);
  return p;
}

ModelParams ModelParams::Init(const ModelConfig& cfg, Rng& rng) {
  cfg.validate();
  ModelParams p = Zeros(cfg);
  const double d_in = static_cast<double>(cfg.input_dim);
  const double d_emb = static_cast<double>(cfg.embed_dim);
  std::normal_distribution<double> proj(0.0, 1.0 / std::sqrt(d_in));
  std::normal_distribution<double> emb(0.0, 1.0 / std::sqrt(d_emb));
  for (double& v : p.proj_w.data()) v = proj(rng);
  for (double& v : p.kappa_w) v = emb(rng);
  for (auto& w : p.edge_w) w = Matrix::Identity(cfg.embed_dim);
  p.attn_temp = cfg.attn_temp_init;
  p.causal_w = Matrix::Identity(cfg.embed_dim);
  for (double& v : p.causal_w.data()) v *= kCausalInitScale;
  p.gamma_temp = cfg.gamma_temp_init;
  for (double& v : p.head_w.data()) v = emb(rng);
  return p;
}

void ModelParams::validate(const ModelConfig& cfg) const {
  auto shape = [](const Matrix& m, std::size_t r, std::size_t c, const char* name) {
    CSPHHN_REQUIRE(m.rows() == r && m.cols() == c,
                   std::string("ModelParams: ") + name + " has shape " +
                       std::to_string(m.rows()) + "x" + std::to_string(m.cols()) +
                       ", expected " + std::to_string(r) + "x" + std::to_string(c));
  };
  shape(proj_w, cfg.embed_dim, cfg.input_dim, "proj_w");
  CSPHHN_REQUIRE(proj_b.size() == cfg.embed_dim, "ModelParams: proj_b size");
  CSPHHN_REQUIRE(kappa_w.size() == cfg.embed_dim, "ModelParams: kappa_w size");
  CSPHHN_REQUIRE(edge_w.size() == cfg.context_types,
                 "ModelParams: one edge_w per context type required");
  for (const auto& w : edge_w) shape(w, cfg.embed_dim, cfg.embed_dim, "edge_w");
  shape(causal_w, cfg.embed_dim, cfg.embed_dim, "causal_w");
  shape(head_w, cfg.classes, cfg.embed_dim, "head_w");
  CSPHHN_REQUIRE(head_b.size() == cfg.classes, "ModelParams: head_b size");
  for_each([](std::string_view name, std::span<const double> s) {
    RequireFinite(s, std::string(name));
  });
  CSPHHN_REQUIRE(attn_temp > 0.0, "ModelParams: attn_temp must be > 0");
  CSPHHN_REQUIRE(gamma_temp > 0.0, "ModelParams: gamma_temp must be > 0");
}

std::size_t ModelParams::parameter_count() const {
  std::size_t n = 0;
  for_each([&](std::string_view, std::span<const double> s) { n += s.size(); });
  return n;
}

std::vector<std::string> model_context_types(const Dataset& ds) {
  auto types = ds.context_types();
  if (types.empty()) types.push_back("default");
  return types;
}

ModelInputs make_model_inputs(const Dataset& ds,
                              const granger::CausalGraph* graph,
                              const ModelConfig& cfg,
                              const std::vector<std::string>& context_types) {
  CSPHHN_REQUIRE(ds.dim == cfg.input_dim,
                 "make_model_inputs: dataset dim " + std::to_string(ds.dim) +
                     " != model input_dim " + std::to_string(cfg.input_dim));
  CSPHHN_REQUIRE(context_types.size() == cfg.context_types,
                 "make_model_inputs: context type count mismatch");
  const Dataset* source = &ds;
  Dataset expanded;
  if (cfg.pairwise) {
    expanded = expand_to_pairwise(ds);
    source = &expanded;
  }
  std::map<std::string, std::size_t> type_index;
  for (std::size_t k = 0; k < context_types.size(); ++k)
    type_index[context_types[k]] = k;

  ModelInputs in;
  const std::size_t n = ds.nodes.size();
  in.features = Matrix(n, ds.dim);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& f = ds.nodes[i].features;
    const auto last = f.row(f.rows() - 1);
    std::copy(last.begin(), last.end(), in.features.row(i).begin());
  }
  const IncidenceIndex index = build_index(*source);
  in.edge_members = index.edge_nodes;
  in.node_edges = index.node_edges;
  for (const auto& e : source->hyperedges) {
    auto it = type_index.find(e.context_type);
    if (it == type_index.end()) {
      throw ValidationError("hyperedge '" + e.id + "' has context type '" +
                            e.context_type + "' unknown to the model");
    }
    in.edge_type.push_back(it->second);
  }
  in.parents.assign(n, {});
  if (graph != nullptr && cfg.use_causal) in.parents = graph->parents(n);
  return in;
}

SphericalEmbedding project(std::span<const double> x, const ModelParams& params,
                           bool euclidean) {
  Vector z = matvec(params.proj_w, x);
  axpy(1.0, params.proj_b, z);
  SphericalEmbedding out;
  const double n = norm2(z);
  if (!euclidean && n < kDegenerateNorm) {
    out.h = UnitE1(z.size());
    out.kappa = 0.0;
    out.degenerate = true;
    return out;
  }
  out.kappa = softplus(dot(params.kappa_w, z) + params.kappa_b);
  if (euclidean) {
    out.h = std::move(z);
  } else {
    for (double& v : z) v /= n;
    out.h = std::move(z);
  }
  return out;
}

std::vector<Vector> edge_attention(std::span<const std::size_t> members,
                                   const std::vector<Vector>& embeddings,
                                   double attn_temp) {
  CSPHHN_REQUIRE(members.size() >= 2, "edge_attention: hyperedge needs >= 2 members");
  std::vector<Vector> out;
  out.reserve(members.size());
  Vector logits(members.size());
  for (std::size_t a = 0; a < members.size(); ++a) {
    const Vector& hi = embeddings.at(members[a]);
    for (std::size_t b = 0; b < members.size(); ++b)
      logits[b] = attn_temp * dot(hi, embeddings.at(members[b]));
    out.push_back(softmax_stable(logits));
  }
  return out;
}

std::vector<std::vector<Vector>> transform_embeddings(
    const std::vector<Vector>& embeddings, const ModelParams& params) {
  std::vector<std::vector<Vector>> out(params.edge_w.size());
  for (std::size_t k = 0; k < params.edge_w.size(); ++k) {
    out[k].reserve(embeddings.size());
    for (const auto& h : embeddings) out[k].push_back(matvec(params.edge_w[k], h));
  }
  return out;
}

Vector hyperedge_aggregate(std::size_t node, const ModelInputs& inputs,
                           const std::vector<std::vector<Vector>>& transformed,
                           const std::vector<std::vector<Vector>>& attention) {
  CSPHHN_REQUIRE(node < inputs.node_count(), "hyperedge_aggregate: node out of range");
  const std::size_t dim = transformed.at(0).at(0).size();
  Vector m(dim, 0.0);
  for (std::size_t e : inputs.node_edges[node]) {
    const auto& members = inputs.edge_members[e];
    const auto row = static_cast<std::size_t>(
        std::lower_bound(members.begin(), members.end(), node) - members.begin());
    const Vector& alpha = attention[e][row];
    const auto& vk = transformed[inputs.edge_type[e]];
    for (std::size_t b = 0; b < members.size(); ++b) axpy(alpha[b], vk[members[b]], m);
  }
  return m;
}

CausalMix causal_aggregate(std::size_t node, const ModelInputs& inputs,
                           const std::vector<Vector>& embeddings,
                           const ModelParams& params, bool euclidean) {
  CausalMix mix;
  const auto& parents = inputs.parents.at(node);
  const Vector& h = embeddings.at(node);
  if (parents.empty()) {
    mix.mixed = h;
    mix.output = h;
    return mix;
  }
  Vector logits(parents.size());
  for (std::size_t k = 0; k < parents.size(); ++k)
    logits[k] = params.gamma_temp * parents[k].f_statistic;
  mix.weights = softmax_stable(logits);
  Vector parent_sum(h.size(), 0.0);
  for (std::size_t k = 0; k < parents.size(); ++k)
    axpy(mix.weights[k], embeddings.at(parents[k].node), parent_sum);
  mix.mixed = matvec(params.causal_w, parent_sum);
  axpy(1.0, h, mix.mixed);
  if (euclidean) {
    mix.output = mix.mixed;
    return mix;
  }
  const double n = norm2(mix.mixed);
  if (n < kDegenerateNorm) {
    mix.output = UnitE1(h.size());
  } else {
    mix.output = mix.mixed;
    for (double& v : mix.output) v /= n;
  }
  return mix;
}

ForwardTrace forward(const ModelInputs& inputs, const ModelParams& params,
                     const ModelConfig& cfg, Mode mode, Rng* rng,
                     const DropoutMasks* masks) {
  const std::size_t n = inputs.node_count();
  const std::size_t dim = cfg.embed_dim;
  CSPHHN_REQUIRE(inputs.features.cols() == cfg.input_dim,
                 "forward: feature dimension does not match the model");
  CSPHHN_REQUIRE(params.proj_w.rows() == dim && params.proj_w.cols() == cfg.input_dim,
                 "forward: parameters do not match the model configuration");
  CSPHHN_REQUIRE(params.edge_w.size() == cfg.context_types,
                 "forward: parameters do not match the context type count");
  const bool spherical = !cfg.euclidean;
  const bool use_dropout = mode == Mode::kTrain && cfg.dropout > 0.0;
  if (use_dropout && masks == nullptr)
    CSPHHN_REQUIRE(rng != nullptr, "forward: train mode with dropout needs an rng");
  if (use_dropout && masks != nullptr)
    CSPHHN_REQUIRE(masks->size() == cfg.layers, "forward: dropout mask layer count");

  ForwardTrace tr;
  tr.z.resize(n);
  tr.z_norm.assign(n, 0.0);
  tr.kappa_logit.assign(n, 0.0);
  tr.kappa.assign(n, 0.0);
  tr.entropy.assign(n, 0.0);
  tr.projected.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    Vector z = matvec(params.proj_w, inputs.features.row(i));
    axpy(1.0, params.proj_b, z);
    tr.z_norm[i] = norm2(z);
    if (!std::isfinite(tr.z_norm[i])) {
      throw NumericalError("forward: non-finite projection at node " +
                           std::to_string(i));
    }
    if (spherical && tr.z_norm[i] < kDegenerateNorm) {
      tr.projected[i] = UnitE1(dim);
      tr.kappa[i] = 0.0;
      tr.diagnostics.push_back("node " + std::to_string(i) +
                               ": degenerate projection, using e1 with kappa 0");
    } else {
      tr.kappa_logit[i] = dot(params.kappa_w, z) + params.kappa_b;
      tr.kappa[i] = softplus(tr.kappa_logit[i]);
      if (!std::isfinite(tr.kappa[i])) {
        throw NumericalError("forward: non-finite concentration at node " +
                             std::to_string(i));
      }
      tr.projected[i] = z;
      if (spherical)
        for (double& v : tr.projected[i]) v /= tr.z_norm[i];
    }
    tr.entropy[i] = vmf::entropy(static_cast<int>(dim), tr.kappa[i]);
    tr.z[i] = std::move(z);
  }

  std::bernoulli_distribution keep(1.0 - cfg.dropout);
  const double keep_scale = 1.0 / (1.0 - cfg.dropout);

  const std::vector<Vector>* current = &tr.projected;
  tr.layers.resize(cfg.layers);
  for (std::size_t l = 0; l < cfg.layers; ++l) {
    LayerTrace& lt = tr.layers[l];
    lt.input = *current;
    std::vector<std::vector<Vector>> attention(inputs.edge_members.size());
    for (std::size_t e = 0; e < inputs.edge_members.size(); ++e) {
      attention[e] = edge_attention(inputs.edge_members[e], lt.input, params.attn_temp);
      for (std::size_t a = 0; a < inputs.edge_members[e].size(); ++a)
        lt.groups.push_back({e, inputs.edge_members[e][a], attention[e][a]});
    }
    const auto transformed = transform_embeddings(lt.input, params);
    lt.pre.resize(n);
    lt.act.resize(n);
    lt.output.resize(n);
    lt.act_norm.assign(n, 0.0);
    if (use_dropout) lt.mask.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      lt.pre[i] = inputs.node_edges[i].empty()
                      ? Vector(dim, 0.0)
                      : hyperedge_aggregate(i, inputs, transformed, attention);
      Vector act = lt.pre[i];
      if (use_dropout) {
        if (masks != nullptr) {
          lt.mask[i] = (*masks)[l].at(i);
          CSPHHN_REQUIRE(lt.mask[i].size() == dim, "forward: dropout mask width");
        } else {
          lt.mask[i].resize(dim);
          for (double& m : lt.mask[i]) m = keep(*rng) ? keep_scale : 0.0;
        }
        for (std::size_t k = 0; k < dim; ++k) act[k] *= lt.mask[i][k];
      }
      for (double& v : act) v = std::max(v, 0.0);
      lt.act_norm[i] = norm2(act);
      if (!spherical) {
        lt.output[i] = act;
      } else if (lt.act_norm[i] < kDegenerateNorm) {
        lt.output[i] = UnitE1(dim);
      } else {
        lt.output[i] = act;
        for (double& v : lt.output[i]) v /= lt.act_norm[i];
      }
      lt.act[i] = std::move(act);
    }
    current = &lt.output;
  }

  tr.gamma_temp = params.gamma_temp;
  tr.causal_weights.resize(n);
  tr.causal_mixed.resize(n);
  tr.causal_norm.assign(n, 0.0);
  tr.final_embedding.resize(n);
  tr.logits.resize(n);
  tr.probs.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    CausalMix mix = causal_aggregate(i, inputs, *current, params, cfg.euclidean);
    tr.causal_norm[i] = norm2(mix.mixed);
    tr.causal_weights[i] = std::move(mix.weights);
    tr.causal_mixed[i] = std::move(mix.mixed);
    tr.final_embedding[i] = std::move(mix.output);
    Vector logits = matvec(params.head_w, tr.final_embedding[i]);
    axpy(1.0, params.head_b, logits);
    tr.probs[i] = softmax_stable(logits);
    tr.logits[i] = std::move(logits);
  }
  return tr;
}

ModelParams backward(const ModelInputs& inputs, const ModelParams& params,
                     const ModelConfig& cfg, const ForwardTrace& tr,
                     const OutputGradients& up) {
  const std::size_t n = inputs.node_count();
  const std::size_t dim = cfg.embed_dim;
  const bool spherical = !cfg.euclidean;
  CSPHHN_REQUIRE(up.logits.size() == n && up.kappa.size() == n,
                 "backward: upstream gradient size mismatch");
  ModelParams g = ModelParams::Zeros(cfg);

  // Head.
  std::vector<Vector> d_final(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Vector& dl = up.logits[i];
    add_outer(g.head_w, 1.0, dl, tr.final_embedding[i]);
    axpy(1.0, dl, g.head_b);
    d_final[i] = matvec_transposed(params.head_w, dl);
  }

  // Causal mixing on the last layer's output.
  const std::vector<Vector>& last =
      cfg.layers == 0 ? tr.projected : tr.layers.back().output;
  std::vector<Vector> d_h(n, Vector(dim, 0.0));
  g.gamma_temp = up.gamma_temp;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& parents = inputs.parents[i];
    if (parents.empty()) {
      axpy(1.0, d_final[i], d_h[i]);
      continue;
    }
    Vector du;
    if (!spherical) {
      du = d_final[i];
    } else if (tr.causal_norm[i] < kDegenerateNorm) {
      continue;
    } else {
      du = NormalizeBackward(tr.final_embedding[i], tr.causal_norm[i], d_final[i]);
    }
    axpy(1.0, du, d_h[i]);
    const Vector& gamma = tr.causal_weights[i];
    const Vector wct_du = matvec_transposed(params.causal_w, du);
    Vector d_gamma(parents.size());
    for (std::size_t k = 0; k < parents.size(); ++k) {
      const Vector& hj = last[parents[k].node];
      d_gamma[k] = dot(wct_du, hj);
      add_outer(g.causal_w, gamma[k], du, hj);
      axpy(gamma[k], wct_du, d_h[parents[k].node]);
    }
    double mean = 0.0;
    for (std::size_t k = 0; k < parents.size(); ++k) mean += gamma[k] * d_gamma[k];
    for (std::size_t k = 0; k < parents.size(); ++k) {
      g.gamma_temp += gamma[k] * (d_gamma[k] - mean) * parents[k].f_statistic;
    }
  }

  // Message-passing layers, last to first.
  for (std::size_t l = cfg.layers; l-- > 0;) {
    const LayerTrace& lt = tr.layers[l];
    std::vector<Vector> d_pre(n, Vector(dim, 0.0));
    for (std::size_t i = 0; i < n; ++i) {
      Vector d_act;
      if (!spherical) {
        d_act = d_h[i];
      } else if (lt.act_norm[i] < kDegenerateNorm) {
        continue;
      } else {
        d_act = NormalizeBackward(lt.output[i], lt.act_norm[i], d_h[i]);
      }
      for (std::size_t k = 0; k < dim; ++k) {
        if (!(lt.act[i][k] > 0.0)) continue;
        d_pre[i][k] = lt.mask.empty() ? d_act[k] : d_act[k] * lt.mask[i][k];
      }
    }

    const auto transformed = transform_embeddings(lt.input, params);
    std::vector<std::vector<Vector>> d_transformed(
        params.edge_w.size(), std::vector<Vector>(n));
    std::vector<Vector> d_in(n, Vector(dim, 0.0));
    for (const AttentionGroup& grp : lt.groups) {
      const std::size_t i = grp.node;
      const auto& members = inputs.edge_members[grp.edge];
      const std::size_t k = inputs.edge_type[grp.edge];
      const Vector& dm = d_pre[i];
      const Vector& alpha = grp.weights;
      Vector d_alpha(members.size());
      double mean = 0.0;
      for (std::size_t b = 0; b < members.size(); ++b) {
        d_alpha[b] = dot(dm, transformed[k][members[b]]);
        mean += alpha[b] * d_alpha[b];
        Vector& dv = d_transformed[k][members[b]];
        if (dv.empty()) dv.assign(dim, 0.0);
        axpy(alpha[b], dm, dv);
      }
      const Vector& hi = lt.input[i];
      for (std::size_t b = 0; b < members.size(); ++b) {
        const double ds = alpha[b] * (d_alpha[b] - mean);
        if (ds == 0.0) continue;
        const Vector& hj = lt.input[members[b]];
        g.attn_temp += ds * dot(hi, hj);
        axpy(ds * params.attn_temp, hj, d_in[i]);
        axpy(ds * params.attn_temp, hi, d_in[members[b]]);
      }
    }
    for (std::size_t k = 0; k < params.edge_w.size(); ++k) {
      for (std::size_t j = 0; j < n; ++j) {
        const Vector& dv = d_transformed[k][j];
        if (dv.empty()) continue;
        add_outer(g.edge_w[k], 1.0, dv, lt.input[j]);
        axpy(1.0, matvec_transposed(params.edge_w[k], dv), d_in[j]);
      }
    }
    d_h = std::move(d_in);
  }

  // Projection and concentration head.
  for (std::size_t i = 0; i < n; ++i) {
    if (spherical && tr.z_norm[i] < kDegenerateNorm) continue;
    Vector dz = spherical ? NormalizeBackward(tr.projected[i], tr.z_norm[i], d_h[i])
                          : d_h[i];
    const double da = up.kappa[i] * sigmoid(tr.kappa_logit[i]);
    if (da != 0.0) {
      axpy(da, tr.z[i], g.kappa_w);
      g.kappa_b += da;
      axpy(da, params.kappa_w, dz);
    }
    add_outer(g.proj_w, 1.0, dz, inputs.features.row(i));
    axpy(1.0, dz, g.proj_b);
  }
  return g;
}

std::string trace_to_json(const ForwardTrace& trace) {
  using nlohmann::json;
  json doc;
  doc["kappa"] = trace.kappa;
  doc["entropy"] = trace.entropy;
  doc["projected"] = trace.projected;
  json layers = json::array();
  for (const auto& lt : trace.layers) {
    json groups = json::array();
    for (const auto& g : lt.groups)
      groups.push_back({{"edge", g.edge}, {"node", g.node}, {"weights", g.weights}});
    layers.push_back({{"embeddings", lt.output}, {"attention", std::move(groups)}});
  }
  doc["layers"] = std::move(layers);
  doc["causal_weights"] = trace.causal_weights;
  doc["final_embedding"] = trace.final_embedding;
  doc["logits"] = trace.logits;
  doc["probs"] = trace.probs;
  doc["diagnostics"] = trace.diagnostics;
  return doc.dump();
}

}  // namespace csphhn
