#include "purouter/losses.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <string>

#include "purouter/errors.hpp"
#include "purouter/ops.hpp"

namespace purouter::losses {
namespace {

void require_same_length(std::size_t a, std::size_t b, const char* op) {
  if (a != b) {
    throw DimensionError(std::string(op) + ": prediction [" + std::to_string(a) + "] vs target [" +
                         std::to_string(b) + "]");
  }
}

// d/do of -(t log c(o) + (1 - t) log(1 - c(o))); zero where the clamp is active.
double bce_derivative(double o, double t) {
  if (o < kProbEpsilon || o > 1.0 - kProbEpsilon) return 0.0;
  return -t / o + (1.0 - t) / (1.0 - o);
}

}  // namespace

double clamp_probability(double p) { return std::clamp(p, kProbEpsilon, 1.0 - kProbEpsilon); }

TargetVector TargetVector::one_hot(std::size_t ground_truth, std::size_t n) {
  if (ground_truth >= n) {
    throw InputError("one_hot: ground truth " + std::to_string(ground_truth) + " >= n " + std::to_string(n));
  }
  TargetVector y;
  y.values.assign(n, 0.0);
  y.values[ground_truth] = 1.0;
  y.source = Source::kOneHot;
  y.ground_truth = ground_truth;
  return y;
}

void LossWeights::validate() const {
  if (!(beta >= 0.0)) throw ConfigError("beta must be >= 0");
  if (!(alpha_base > 0.0 && alpha_base < 1.0)) throw ConfigError("alpha_base must lie in (0, 1)");
  if (!(distill_temperature > 0.0)) throw ConfigError("temperature must be > 0");
}

double bce(std::span<const double> o, std::span<const double> target) {
  require_same_length(o.size(), target.size(), "bce");
  double s = 0.0;
  for (std::size_t i = 0; i < o.size(); ++i) {
    const double p = clamp_probability(o[i]);
    s += target[i] * std::log(p) + (1.0 - target[i]) * std::log(1.0 - p);
  }
  return -s;
}

double base_bce(std::span<const double> o, const TargetVector& y) { return bce(o, y.values); }

double pseudo_bce(std::span<const double> o, const TargetVector& y_tilde) {
  require_same_length(o.size(), y_tilde.values.size(), "pseudo_bce");
  if (y_tilde.ground_truth >= y_tilde.values.size() || y_tilde.values[y_tilde.ground_truth] != 1.0) {
    throw InvariantError("pseudo_bce: target is missing the ground-truth bit " +
                         std::to_string(y_tilde.ground_truth));
  }
  return bce(o, y_tilde.values);
}

bool is_tie_inclusive_max(std::span<const double> o, std::size_t j) {
  for (std::size_t i = 0; i < o.size(); ++i) {
    if (i != j && o[i] > o[j]) return false;
  }
  return true;
}

double negative_feedback_loss(std::span<const double> o, std::size_t j) {
  if (j >= o.size()) {
    throw InputError("negative_feedback_loss: index " + std::to_string(j) + " >= n " + std::to_string(o.size()));
  }
  if (!is_tie_inclusive_max(o, j)) return 0.0;
  return -std::log(1.0 - clamp_probability(o[j]));
}

std::vector<double> soften_teacher(std::span<const double> teacher_logits, double temperature) {
  if (!(temperature > 0.0)) throw InputError("temperature must be > 0");
  std::vector<double> soft(teacher_logits.size());
  for (std::size_t i = 0; i < soft.size(); ++i) soft[i] = nn::sigmoid(teacher_logits[i] / temperature);
  return soft;
}

double self_distillation_loss(std::span<const double> o, std::span<const double> teacher_logits,
                              double temperature) {
  require_same_length(o.size(), teacher_logits.size(), "self_distillation_loss");
  return bce(o, soften_teacher(teacher_logits, temperature));
}

double alpha_schedule(int epoch, double base) {
  if (epoch < 0) throw InputError("alpha_schedule: epoch must be >= 0");
  return 1.0 - std::pow(base, epoch);
}

double combined_loss(const LossTerms& terms, int epoch, const LossWeights& weights) {
  for (double v : {terms.base, terms.pseudo, terms.distill, terms.negative}) {
    if (!std::isfinite(v)) throw NumericError("combined_loss: non-finite component loss");
  }
  const double a = alpha_schedule(epoch, weights.alpha_base);
  return (1.0 - a) * terms.base + a * (terms.pseudo + terms.distill) + weights.beta * terms.negative;
}

nn::Var bce(nn::Tape& tape, nn::Var o, std::span<const double> target) {
  const double value = bce(tape.value(o), target);
  std::vector<double> t(target.begin(), target.end());
  return tape.push({value}, [o, t = std::move(t)](nn::Tape& tp, nn::Var self) {
    const double g = tp.grad(self)[0];
    const auto ov = tp.value(o);
    auto go = tp.grad(o);
    for (std::size_t i = 0; i < ov.size(); ++i) go[i] += g * bce_derivative(ov[i], t[i]);
  });
}

nn::Var negative_feedback_loss(nn::Tape& tape, nn::Var o, std::size_t j) {
  const auto ov = tape.value(o);
  const double value = negative_feedback_loss(ov, j);
  const bool active = is_tie_inclusive_max(ov, j);
  return tape.push({value}, [o, j, active](nn::Tape& tp, nn::Var self) {
    if (!active) return;
    const double g = tp.grad(self)[0];
    tp.grad(o)[j] += g * bce_derivative(tp.value(o)[j], 0.0);
  });
}

nn::Var combined_loss(nn::Tape& tape, nn::Var base, nn::Var pseudo, nn::Var distill, nn::Var negative, int epoch,
                      const LossWeights& weights) {
  const LossTerms terms{tape.scalar(base), tape.scalar(pseudo), tape.scalar(distill), tape.scalar(negative)};
  const double value = combined_loss(terms, epoch, weights);
  const double a = alpha_schedule(epoch, weights.alpha_base);
  const double coeffs[] = {1.0 - a, a, a, weights.beta};
  return tape.push({value}, [base, pseudo, distill, negative, c = std::to_array(coeffs)](nn::Tape& tp,
                                                                                          nn::Var self) {
    const double g = tp.grad(self)[0];
    tp.grad(base)[0] += g * c[0];
    tp.grad(pseudo)[0] += g * c[1];
    tp.grad(distill)[0] += g * c[2];
    tp.grad(negative)[0] += g * c[3];
  });
}

}  // namespace purouter::losses
