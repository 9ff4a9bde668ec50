#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "purouter/tape.hpp"

namespace purouter::losses {

/// Probabilities are clamped to [eps, 1 - eps] before any logarithm.
inline constexpr double kProbEpsilon = 1e-12;

double clamp_probability(double p);

/// 0/1 target over n domains. `ground_truth` is the known label; pseudo labels
/// (if any) are the other set entries.
struct TargetVector {
  enum class Source { kOneHot, kMultiHot };

  std::vector<double> values;
  Source source = Source::kOneHot;
  std::size_t ground_truth = 0;

  static TargetVector one_hot(std::size_t ground_truth, std::size_t n);
};

struct LossWeights {
  double beta = 0.00025;
  double alpha_base = 0.95;
  double distill_temperature = 16.0;

  void validate() const;
};

/// Per-batch component losses of the composite objective.
struct LossTerms {
  double base = 0.0;
  double pseudo = 0.0;
  double distill = 0.0;
  double negative = 0.0;
};

/// -sum_i [t_i log o_i + (1 - t_i) log(1 - o_i)] for any target in [0, 1].
double bce(std::span<const double> o, std::span<const double> target);

double base_bce(std::span<const double> o, const TargetVector& y);
/// Same form as base_bce over the n-hot target; the ground-truth bit must be set.
double pseudo_bce(std::span<const double> o, const TargetVector& y_tilde);

/// True when o_j >= o_i for every i != j.
bool is_tie_inclusive_max(std::span<const double> o, std::size_t j);
/// -log(1 - o_j) when j is a (tie-inclusive) maximum of o, otherwise 0.
double negative_feedback_loss(std::span<const double> o, std::size_t j);

/// sigmoid(teacher_logits / temperature), elementwise.
std::vector<double> soften_teacher(std::span<const double> teacher_logits, double temperature);
double self_distillation_loss(std::span<const double> o, std::span<const double> teacher_logits,
                              double temperature);

/// 1 - base^t.
double alpha_schedule(int epoch, double base = 0.95);

/// (1 - a) L_b + a (L_d + L_s) + beta L_n with a = alpha_schedule(epoch).
double combined_loss(const LossTerms& terms, int epoch, const LossWeights& weights);

// Tape-recording versions. Forward values are bitwise identical to the
// scalar functions above.
nn::Var bce(nn::Tape& tape, nn::Var o, std::span<const double> target);
nn::Var negative_feedback_loss(nn::Tape& tape, nn::Var o, std::size_t j);
nn::Var combined_loss(nn::Tape& tape, nn::Var base, nn::Var pseudo, nn::Var distill, nn::Var negative, int epoch,
                      const LossWeights& weights);

}  // namespace purouter::losses
