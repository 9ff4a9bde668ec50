#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "purouter/corpus.hpp"

namespace purouter {

struct EvalRecord {
  std::string id;
  std::vector<DomainIndex> ranked;    // best first, duplicate-free
  std::vector<DomainIndex> relevant;  // oracle label set

  void validate() const;
};

struct PrfScores {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

/// Micro-averaged over records:
///   P = sum |top-k ∩ rel| / sum min(k, |ranked|), R = sum |top-k ∩ rel| / sum |rel|.
PrfScores precision_recall_f1(std::span<const EvalRecord> records, std::size_t k);

/// Mean over records of DCG@k / IDCG@k with binary gains and log2(i + 1)
/// discounts (ranks from 1).
double ndcg_at_k(std::span<const EvalRecord> records, std::size_t k = 3);

struct McNemarResult {
  std::size_t a_only = 0;  // b: A correct, B wrong
  std::size_t b_only = 0;  // c: A wrong, B correct
  double statistic = 0.0;
  bool significant = false;
};

/// Critical value of chi-square(1) at p = 0.05.
inline constexpr double kChiSquare1At05 = 3.841;

/// Continuity-corrected McNemar test, (|b - c| - 1)^2 / (b + c).
McNemarResult mcnemar_test(const std::vector<bool>& correct_a, const std::vector<bool>& correct_b);

/// Top-1 correctness per record.
std::vector<bool> top1_correct(std::span<const EvalRecord> records);

}  // namespace purouter
