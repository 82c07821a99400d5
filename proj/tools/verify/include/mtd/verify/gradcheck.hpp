#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "mtd/tensor.hpp"

namespace mtd::verify {

/// Builds a scalar loss from leaves holding the given inputs.
using LossBuilder = std::function<Var(Tape&, std::span<const Var>)>;

struct GradCheck {
  std::vector<double> relative_error;  ///< per input tensor
  double max_error = 0.0;
  std::size_t worst_input = 0;
};

/// Compares reverse-mode gradients against central differences. The error of
/// an input is |g_analytic - g_numeric| / max(|g_analytic|, |g_numeric|) in
/// the Euclidean norm over the whole tensor, or the absolute difference when
/// both norms are below `floor`.
GradCheck check_gradients(const LossBuilder& build, const std::vector<Tensor>& inputs, double step = 1e-5,
                          double floor = 1e-8);

}  // namespace mtd::verify
