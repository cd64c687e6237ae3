#include "csphhn/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "csphhn/errors.hpp"
#include "json.hpp"

namespace csphhn {

TinyProblem make_tiny_problem(std::uint64_t seed) {
  TinyProblem p;
  p.model.input_dim = 4;
  p.model.embed_dim = 4;
  p.model.classes = 3;
  p.model.context_types = 1;
  p.model.layers = 2;
  p.model.dropout = 0.2;
  p.train.lambda1 = 0.1;
  p.train.lambda2 = 0.1;
  p.train.dropout = 0.2;

  Rng rng = make_rng(seed, "gradcheck");
  std::normal_distribution<double> normal(0.0, 1.0);
  constexpr std::size_t kNodes = 6;
  p.inputs.features = Matrix(kNodes, 4);
  for (double& v : p.inputs.features.data()) v = normal(rng);
  p.inputs.edge_members = {{0, 1, 2, 3, 4}};
  p.inputs.edge_type = {0};
  p.inputs.node_edges = {{0}, {0}, {0}, {0}, {0}, {}};
  p.inputs.parents.assign(kNodes, {});
  p.inputs.parents[0] = {{3, 2.5}, {5, 1.0}};
  p.inputs.parents[2] = {{1, 4.0}};

  p.params = ModelParams::Init(p.model, rng);
  p.params.for_each([&](std::string_view, std::span<double> values) {
    for (double& v : values) v += 0.3 * normal(rng);
  });
  // Moderate temperatures keep the softmaxes away from saturation, where
  // finite differences lose precision.
  p.params.attn_temp = 3.0;
  p.params.gamma_temp = 0.7;

  std::bernoulli_distribution keep(1.0 - p.model.dropout);
  const double scale = 1.0 / (1.0 - p.model.dropout);
  p.masks.assign(p.model.layers, std::vector<Vector>(kNodes, Vector(4)));
  for (auto& layer : p.masks)
    for (auto& node : layer)
      for (double& v : node) v = keep(rng) ? scale : 0.0;

  p.labels = {0, 1, 2, 1, 0, 2};
  p.batch = {0, 1, 2, 3, 4, 5};
  return p;
}

GradcheckReport gradient_check(const TinyProblem& problem, double step,
                               const std::optional<std::string>& corrupt_group) {
  CSPHHN_REQUIRE(step > 0.0, "gradient_check: step must be > 0");
  auto loss_at = [&](const ModelParams& params) {
    const ForwardTrace trace = forward(problem.inputs, params, problem.model,
                                       Mode::kTrain, nullptr, &problem.masks);
    return loss(trace, problem.labels, problem.batch, problem.inputs, problem.train)
        .total;
  };
  ModelParams analytic = gradients(problem.inputs, problem.params, problem.model,
                                   problem.labels, problem.batch, problem.train,
                                   Mode::kTrain, nullptr, &problem.masks)
                             .grads;
  bool corrupted = false;
  if (corrupt_group) {
    analytic.for_each([&](std::string_view name, std::span<double> g) {
      if (name == *corrupt_group && !g.empty()) {
        g[0] += 1e-2 + std::abs(g[0]);
        corrupted = true;
      }
    });
    CSPHHN_REQUIRE(corrupted, "gradient_check: unknown parameter group '" +
                                  *corrupt_group + "'");
  }

  std::vector<std::span<const double>> grad_tensors;
  analytic.for_each([&](std::string_view, std::span<const double> g) {
    grad_tensors.push_back(g);
  });

  GradcheckReport report;
  report.step = step;
  ModelParams probe = problem.params;
  std::size_t group = 0;
  probe.for_each([&](std::string_view name, std::span<double> values) {
    GroupCheck check;
    check.name = std::string(name);
    check.size = values.size();
    for (std::size_t k = 0; k < values.size(); ++k) {
      const double saved = values[k];
      values[k] = saved + step;
      const double up = loss_at(probe);
      values[k] = saved - step;
      const double down = loss_at(probe);
      values[k] = saved;
      const double numeric = (up - down) / (2.0 * step);
      const double a = grad_tensors[group][k];
      const double rel = std::abs(a - numeric) /
                         std::max({std::abs(a), std::abs(numeric), kGradcheckFloor});
      if (k == 0 || rel > check.max_rel_error) {
        check.max_rel_error = rel;
        check.worst_index = k;
        check.analytic = a;
        check.numeric = numeric;
      }
    }
    report.max_rel_error = std::max(report.max_rel_error, check.max_rel_error);
    report.groups.push_back(std::move(check));
    ++group;
  });
  return report;
}

std::string gradcheck_to_json(const GradcheckReport& report) {
  using nlohmann::json;
  json groups = json::array();
  for (const auto& g : report.groups) {
    groups.push_back({{"name", g.name},
                      {"size", g.size},
                      {"max_rel_error", g.max_rel_error},
                      {"worst_index", g.worst_index},
                      {"analytic", g.analytic},
                      {"numeric", g.numeric}});
  }
  json doc = {{"max_rel_error", report.max_rel_error},
              {"tolerance", report.tolerance},
              {"step", report.step},
              {"passed", report.passed()},
              {"groups", groups}};
  return doc.dump(1) + "\n";
}

}  // namespace csphhn
