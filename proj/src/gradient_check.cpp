#include "purouter/gradient_check.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "purouter/errors.hpp"

namespace purouter::nn {
namespace {

double evaluate(const LossBuilder& loss, const char* where) {
  Tape tape(false);
  const double v = tape.scalar(loss(tape));
  if (!std::isfinite(v)) throw NumericError(std::string("gradient_check: non-finite loss ") + where);
  return v;
}

}  // namespace

GradientCheckResult gradient_check(const LossBuilder& loss, ParameterSet& params, double step) {
  if (!(step >= 1e-7 && step <= 1e-3)) {
    throw InputError("gradient_check: step " + std::to_string(step) + " outside [1e-7, 1e-3]");
  }
  params.zero_grad();
  {
    Tape tape;
    const Var out = loss(tape);
    if (!std::isfinite(tape.scalar(out))) throw NumericError("gradient_check: non-finite loss at base point");
    tape.backward(out);
  }
  std::vector<Tensor> analytic;
  analytic.reserve(params.size());
  for (auto& p : params) analytic.push_back(p.grad);

  GradientCheckResult result;
  std::size_t pi = 0;
  for (auto& p : params) {
    auto values = p.value.data();
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double orig = values[i];
      values[i] = orig + step;
      const double up = evaluate(loss, "at +step");
      values[i] = orig - step;
      const double down = evaluate(loss, "at -step");
      values[i] = orig;
      const double numeric = (up - down) / (2.0 * step);
      const double a = analytic[pi][i];
      const double denom = std::max({std::abs(a), std::abs(numeric), 1e-8});
      const double rel = std::abs(a - numeric) / denom;
      if (rel > result.max_relative_error) {
        result = {rel, p.name, i, a, numeric};
      }
    }
    ++pi;
  }
  params.zero_grad();
  return result;
}

}  // namespace purouter::nn
