#pragma once

#include <functional>

#include "purouter/parameter.hpp"
#include "purouter/tape.hpp"

namespace purouter::nn {

/// Builds a scalar loss on the given tape from the current parameter values.
using LossBuilder = std::function<Var(Tape&)>;

struct GradientCheckResult {
  double max_relative_error = 0.0;
  std::string worst_parameter;
  std::size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
};

/// Compares tape gradients against central differences over every entry of
/// every parameter in `params`. Relative error per entry is
/// |a - c| / max(|a|, |c|, 1e-8). Gradients in `params` are left zeroed and
/// values restored.
GradientCheckResult gradient_check(const LossBuilder& loss, ParameterSet& params, double step = 1e-5);

}  // namespace purouter::nn
