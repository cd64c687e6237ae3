#include "csphhn/hypergraph.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <string>
#include <unordered_map>

#include "csphhn/errors.hpp"
#include "csphhn/io.hpp"
#include "json.hpp"

namespace csphhn {

using nlohmann::json;

std::vector<std::string> Dataset::context_types() const {
  std::set<std::string> types;
  for (const auto& e : hyperedges) types.insert(e.context_type);
  return {types.begin(), types.end()};
}

void Dataset::validate() const {
  auto fail = [](const std::string& msg) { throw ValidationError(msg); };
  if (dim == 0) fail("dataset: dim must be >= 1");
  if (timesteps == 0) fail("dataset: timesteps must be >= 1");
  if (classes < 2) fail("dataset: classes must be >= 2");

  std::set<std::string> ids;
  for (const auto& n : nodes) {
    if (!ids.insert(n.id).second) fail("dataset: duplicate node id '" + n.id + "'");
    if (n.features.rows() != timesteps || n.features.cols() != dim) {
      fail("dataset: node '" + n.id + "' features are " +
           std::to_string(n.features.rows()) + "x" +
           std::to_string(n.features.cols()) + ", expected " +
           std::to_string(timesteps) + "x" + std::to_string(dim));
    }
    if (!all_finite(n.features.data()))
      fail("dataset: node '" + n.id + "' has non-finite features");
  }

  std::set<std::string> edge_ids;
  for (const auto& e : hyperedges) {
    if (!edge_ids.insert(e.id).second)
      fail("dataset: duplicate hyperedge id '" + e.id + "'");
    if (e.members.size() < 2)
      fail("dataset: hyperedge '" + e.id + "' has fewer than 2 members");
    std::set<std::size_t> seen;
    for (std::size_t m : e.members) {
      if (m >= nodes.size()) {
        throw DanglingReference("dataset: hyperedge '" + e.id +
                                "' references unknown node index " +
                                std::to_string(m));
      }
      if (!seen.insert(m).second) {
        fail("dataset: hyperedge '" + e.id + "' lists node '" + nodes[m].id +
             "' twice");
      }
    }
  }

  if (labels.size() != nodes.size()) {
    fail("dataset: " + std::to_string(labels.size()) + " labels for " +
         std::to_string(nodes.size()) + " nodes");
  }
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= classes) {
      fail("dataset: label of node '" + nodes[i].id + "' out of range");
    }
  }

  std::vector<int> owner(nodes.size(), -1);
  const std::vector<const std::vector<std::size_t>*> parts = {
      &splits.train, &splits.val, &splits.test};
  for (int p = 0; p < 3; ++p) {
    for (std::size_t i : *parts[p]) {
      if (i >= nodes.size()) fail("dataset: split references unknown node");
      if (owner[i] != -1) {
        fail("dataset: node '" + nodes[i].id + "' appears in two splits");
      }
      owner[i] = p;
    }
  }
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    if (owner[i] == -1) fail("dataset: node '" + nodes[i].id + "' is in no split");
  }
}

IncidenceIndex build_index(const Dataset& ds) {
  IncidenceIndex index;
  index.node_edges.resize(ds.nodes.size());
  index.edge_nodes.resize(ds.hyperedges.size());
  for (std::size_t e = 0; e < ds.hyperedges.size(); ++e) {
    for (std::size_t m : ds.hyperedges[e].members) {
      if (m >= ds.nodes.size()) {
        throw DanglingReference("build_index: hyperedge '" +
                                ds.hyperedges[e].id +
                                "' references unknown node index " +
                                std::to_string(m));
      }
      index.edge_nodes[e].push_back(m);
      index.node_edges[m].push_back(e);
    }
    std::sort(index.edge_nodes[e].begin(), index.edge_nodes[e].end());
  }
  return index;
}

namespace {

[[noreturn]] void SchemaError(const std::string& path, const std::string& what) {
  throw ParseError("dataset JSON: field '" + path + "': " + what);
}

const json& Field(const json& obj, const std::string& key,
                  const std::string& path) {
  if (!obj.is_object()) SchemaError(path, "expected an object");
  auto it = obj.find(key);
  if (it == obj.end()) SchemaError(path + "." + key, "missing");
  return *it;
}

std::size_t Count(const json& v, const std::string& path) {
  if (!v.is_number_integer() && !v.is_number_unsigned())
    SchemaError(path, "expected a non-negative integer");
  const auto n = v.get<long long>();
  if (n < 0) SchemaError(path, "expected a non-negative integer");
  return static_cast<std::size_t>(n);
}

const std::string& Str(const json& v, const std::string& path) {
  if (!v.is_string()) SchemaError(path, "expected a string");
  return v.get_ref<const std::string&>();
}

const json& Array(const json& v, const std::string& path) {
  if (!v.is_array()) SchemaError(path, "expected an array");
  return v;
}

std::size_t LineOf(const std::string& text, std::size_t byte) {
  byte = std::min(byte, text.size());
  return 1 + static_cast<std::size_t>(
                 std::count(text.begin(), text.begin() + byte, '\n'));
}

}  // namespace

std::string dataset_to_json(const Dataset& ds) {
  json doc;
  doc["dim"] = ds.dim;
  doc["timesteps"] = ds.timesteps;
  doc["classes"] = ds.classes;
  doc["horizon"] = ds.horizon;
  json nodes = json::array();
  for (const auto& n : ds.nodes) {
    json rows = json::array();
    for (std::size_t t = 0; t < n.features.rows(); ++t) {
      const auto r = n.features.row(t);
      rows.push_back(std::vector<double>(r.begin(), r.end()));
    }
    nodes.push_back({{"id", n.id}, {"features", std::move(rows)}});
  }
  doc["nodes"] = std::move(nodes);
  json edges = json::array();
  for (const auto& e : ds.hyperedges) {
    json members = json::array();
    for (std::size_t m : e.members) members.push_back(ds.nodes.at(m).id);
    edges.push_back(
        {{"id", e.id}, {"members", std::move(members)}, {"type", e.context_type}});
  }
  doc["hyperedges"] = std::move(edges);
  json labels = json::object();
  for (std::size_t i = 0; i < ds.nodes.size(); ++i)
    labels[ds.nodes[i].id] = ds.labels.at(i);
  doc["labels"] = std::move(labels);
  auto ids_of = [&](const std::vector<std::size_t>& idx) {
    json a = json::array();
    for (std::size_t i : idx) a.push_back(ds.nodes.at(i).id);
    return a;
  };
  doc["splits"] = {{"train", ids_of(ds.splits.train)},
                   {"val", ids_of(ds.splits.val)},
                   {"test", ids_of(ds.splits.test)}};
  return doc.dump();
}

Dataset dataset_from_json(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError("dataset JSON: syntax error at line " +
                     std::to_string(LineOf(text, e.byte)) + " (byte " +
                     std::to_string(e.byte) + "): " + e.what());
  }

  Dataset ds;
  ds.dim = Count(Field(doc, "dim", "$"), "$.dim");
  ds.timesteps = Count(Field(doc, "timesteps", "$"), "$.timesteps");
  ds.classes = Count(Field(doc, "classes", "$"), "$.classes");
  ds.horizon = Count(Field(doc, "horizon", "$"), "$.horizon");

  std::unordered_map<std::string, std::size_t> index_of;
  const json& nodes = Array(Field(doc, "nodes", "$"), "$.nodes");
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const std::string path = "$.nodes[" + std::to_string(i) + "]";
    NodeFeatureSeries n;
    n.id = Str(Field(nodes[i], "id", path), path + ".id");
    const json& rows = Array(Field(nodes[i], "features", path), path + ".features");
    n.features = Matrix(rows.size(), ds.dim);
    for (std::size_t t = 0; t < rows.size(); ++t) {
      const std::string rpath = path + ".features[" + std::to_string(t) + "]";
      const json& row = Array(rows[t], rpath);
      if (row.size() != ds.dim) {
        SchemaError(rpath, "expected " + std::to_string(ds.dim) +
                               " values, got " + std::to_string(row.size()));
      }
      for (std::size_t c = 0; c < ds.dim; ++c) {
        if (!row[c].is_number()) SchemaError(rpath, "expected numbers");
        n.features(t, c) = row[c].get<double>();
      }
    }
    if (!index_of.emplace(n.id, i).second) {
      throw ValidationError("dataset: duplicate node id '" + n.id + "'");
    }
    ds.nodes.push_back(std::move(n));
  }

  auto resolve = [&](const json& v, const std::string& path) {
    const std::string& id = Str(v, path);
    auto it = index_of.find(id);
    if (it == index_of.end()) {
      throw DanglingReference("dataset: " + path + " references unknown node '" +
                              id + "'");
    }
    return it->second;
  };

  const json& edges = Array(Field(doc, "hyperedges", "$"), "$.hyperedges");
  for (std::size_t e = 0; e < edges.size(); ++e) {
    const std::string path = "$.hyperedges[" + std::to_string(e) + "]";
    Hyperedge he;
    he.id = Str(Field(edges[e], "id", path), path + ".id");
    he.context_type = Str(Field(edges[e], "type", path), path + ".type");
    const json& members = Array(Field(edges[e], "members", path), path + ".members");
    for (std::size_t m = 0; m < members.size(); ++m) {
      he.members.push_back(
          resolve(members[m], path + ".members[" + std::to_string(m) + "]"));
    }
    ds.hyperedges.push_back(std::move(he));
  }

  const json& labels = Field(doc, "labels", "$");
  if (!labels.is_object()) SchemaError("$.labels", "expected an object");
  ds.labels.assign(ds.nodes.size(), -1);
  std::vector<bool> labelled(ds.nodes.size(), false);
  for (auto it = labels.begin(); it != labels.end(); ++it) {
    const std::string path = "$.labels." + it.key();
    auto found = index_of.find(it.key());
    if (found == index_of.end()) {
      throw DanglingReference("dataset: " + path + " references unknown node");
    }
    if (!it.value().is_number_integer()) SchemaError(path, "expected an integer");
    ds.labels[found->second] = it.value().get<int>();
    labelled[found->second] = true;
  }
  for (std::size_t i = 0; i < labelled.size(); ++i) {
    if (!labelled[i]) {
      throw ValidationError("dataset: node '" + ds.nodes[i].id + "' has no label");
    }
  }

  const json& splits = Field(doc, "splits", "$");
  auto read_split = [&](const char* name) {
    const std::string path = std::string("$.splits.") + name;
    const json& arr = Array(Field(splits, name, "$.splits"), path);
    std::vector<std::size_t> out;
    for (std::size_t k = 0; k < arr.size(); ++k)
      out.push_back(resolve(arr[k], path + "[" + std::to_string(k) + "]"));
    return out;
  };
  ds.splits.train = read_split("train");
  ds.splits.val = read_split("val");
  ds.splits.test = read_split("test");

  ds.validate();
  return ds;
}

Dataset load_dataset(const std::filesystem::path& path) {
  return dataset_from_json(read_text_file(path));
}

void save_dataset(const Dataset& ds, const std::filesystem::path& path) {
  write_text_file_atomic(path, dataset_to_json(ds));
}

Dataset feature_dropout(const Dataset& ds, double rate, Rng& rng) {
  CSPHHN_REQUIRE(rate >= 0.0 && rate < 1.0,
                 "feature_dropout: rate must lie in [0, 1)");
  Dataset out = ds;
  if (rate == 0.0) return out;
  std::bernoulli_distribution drop(rate);
  for (auto& n : out.nodes) {
    for (double& x : n.features.data()) {
      if (drop(rng)) x = 0.0;
    }
  }
  return out;
}

Dataset expand_to_pairwise(const Dataset& ds) {
  Dataset out = ds;
  out.hyperedges.clear();
  for (const auto& e : ds.hyperedges) {
    for (std::size_t a = 0; a < e.members.size(); ++a) {
      for (std::size_t b = a + 1; b < e.members.size(); ++b) {
        out.hyperedges.push_back({e.id + "/" + std::to_string(a) + "-" +
                                      std::to_string(b),
                                  {e.members[a], e.members[b]},
                                  e.context_type});
      }
    }
  }
  return out;
}

std::string dataset_digest(const Dataset& ds) {
  return hex_digest(fnv1a64(dataset_to_json(ds)));
}

}  // namespace csphhn
