#pragma once

// Property suite behind `mtd verify` and the acceptance checks 1-5.

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mtd/graph.hpp"
#include "mtd/model.hpp"
#include "mtd/verify/gradcheck.hpp"

namespace mtd::verify {

struct CheckResult {
  std::string name;
  int criterion = 0;  ///< acceptance criterion the check belongs to
  bool passed = false;
  std::string detail;  ///< measured value, or the first failing case
  double seconds = 0.0;
};

inline constexpr double kGradTolerance = 1e-4;
inline constexpr double kGradStep = 1e-5;
inline constexpr double kStructTolerance = 1e-9;
inline constexpr double kLossTolerance = 1e-12;
inline constexpr double kMetricTolerance = 1e-9;

/// One primitive under gradient check: random inputs and a scalar loss that
/// exercises it.
struct PrimitiveCase {
  std::string name;
  Primitive primitive;
  std::vector<Tensor> inputs;
  LossBuilder build;
};

std::vector<PrimitiveCase> primitive_cases(std::uint64_t seed);

/// Two frames of three nodes, fully linked, with binary, multi-label and
/// categorical targets on the last frame.
Sequence tiny_sequence(std::size_t feature_dim, std::uint64_t seed);
std::vector<RelationSpec> tiny_relations();

/// Gradient check of the full model's total loss w.r.t. every parameter.
GradCheck model_gradient_check(ModelKind kind, std::uint64_t seed);

std::vector<CheckResult> gradient_suite(std::uint64_t seed);
std::vector<CheckResult> structural_suite(std::uint64_t seed);
std::vector<CheckResult> hungarian_suite(std::uint64_t seed);
std::vector<CheckResult> loss_suite(std::uint64_t seed);
std::vector<CheckResult> metric_suite(std::uint64_t seed);

/// Every suite above, in criterion order.
std::vector<CheckResult> property_suite(std::uint64_t seed);

/// Primitives with a backward rule, i.e. the valid fault-injection targets.
std::vector<Primitive> differentiable_primitives();
std::optional<Primitive> parse_primitive(std::string_view name);

}  // namespace mtd::verify
