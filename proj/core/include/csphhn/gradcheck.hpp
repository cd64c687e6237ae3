#ifndef CSPHHN_GRADCHECK_HPP_
#define CSPHHN_GRADCHECK_HPP_

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "csphhn/model.hpp"
#include "csphhn/training.hpp"

namespace csphhn {

inline constexpr double kGradcheckStep = 1e-5;
inline constexpr double kGradcheckTolerance = 1e-4;
// Floor on the denominator of the relative error, so entries whose true
// gradient is zero are judged by absolute error.
inline constexpr double kGradcheckFloor = 1e-6;

// A six-node problem exercising every path of the model: one five-member
// hyperedge, an isolated node, a node with two causal parents and one with a
// single parent, fixed dropout masks and both regularizers switched on.
struct TinyProblem {
  ModelConfig model;
  TrainConfig train;
  ModelInputs inputs;
  ModelParams params;
  DropoutMasks masks;
  std::vector<int> labels;
  std::vector<std::size_t> batch;
};

TinyProblem make_tiny_problem(std::uint64_t seed);

struct GroupCheck {
  std::string name;
  std::size_t size = 0;
  double max_rel_error = 0.0;
  std::size_t worst_index = 0;
  double analytic = 0.0;  // at worst_index
  double numeric = 0.0;
};

struct GradcheckReport {
  std::vector<GroupCheck> groups;
  double max_rel_error = 0.0;
  double tolerance = kGradcheckTolerance;
  double step = kGradcheckStep;
  bool passed() const { return max_rel_error <= tolerance; }
};

// Compares reverse-mode gradients of the training loss with central
// differences. `corrupt_group`, when set, perturbs the analytic gradient of
// that parameter group (negative control for the checker itself).
GradcheckReport gradient_check(const TinyProblem& problem,
                               double step = kGradcheckStep,
                               const std::optional<std::string>& corrupt_group = {});

std::string gradcheck_to_json(const GradcheckReport& report);

}  // namespace csphhn

#endif  // CSPHHN_GRADCHECK_HPP_
