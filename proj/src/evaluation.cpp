#include "purouter/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "purouter/errors.hpp"

namespace purouter {
namespace {

bool contains(const std::vector<DomainIndex>& v, DomainIndex d) { return std::find(v.begin(), v.end(), d) != v.end(); }

void validate_all(std::span<const EvalRecord> records) {
  if (records.empty()) throw InputError("evaluation: no records");
  for (const auto& r : records) r.validate();
}

}  // namespace

void EvalRecord::validate() const {
  if (ranked.empty()) throw InputError("record " + id + " has no predictions");
  if (relevant.empty()) throw InputError("record " + id + " has an empty relevant set");
  std::set<DomainIndex> seen(ranked.begin(), ranked.end());
  if (seen.size() != ranked.size()) throw InputError("record " + id + " has duplicate predictions");
}

PrfScores precision_recall_f1(std::span<const EvalRecord> records, std::size_t k) {
  if (k < 1) throw InputError("precision_recall_f1: k must be >= 1");
  validate_all(records);
  std::size_t hits = 0;
  std::size_t predicted = 0;
  std::size_t relevant = 0;
  for (const auto& r : records) {
    const std::size_t m = std::min(k, r.ranked.size());
    for (std::size_t i = 0; i < m; ++i) hits += contains(r.relevant, r.ranked[i]) ? 1 : 0;
    predicted += m;
    relevant += r.relevant.size();
  }
  PrfScores s;
  s.precision = static_cast<double>(hits) / static_cast<double>(predicted);
  s.recall = static_cast<double>(hits) / static_cast<double>(relevant);
  s.f1 = s.precision + s.recall > 0.0 ? 2.0 * s.precision * s.recall / (s.precision + s.recall) : 0.0;
  return s;
}

double ndcg_at_k(std::span<const EvalRecord> records, std::size_t k) {
  if (k < 1) throw InputError("ndcg_at_k: k must be >= 1");
  validate_all(records);
  double total = 0.0;
  for (const auto& r : records) {
    double dcg = 0.0;
    const std::size_t m = std::min(k, r.ranked.size());
    for (std::size_t i = 0; i < m; ++i) {
      if (contains(r.relevant, r.ranked[i])) dcg += 1.0 / std::log2(static_cast<double>(i) + 2.0);
    }
    double idcg = 0.0;
    const std::size_t ideal = std::min(k, r.relevant.size());
    for (std::size_t i = 0; i < ideal; ++i) idcg += 1.0 / std::log2(static_cast<double>(i) + 2.0);
    total += dcg / idcg;
  }
  return total / static_cast<double>(records.size());
}

McNemarResult mcnemar_test(const std::vector<bool>& correct_a, const std::vector<bool>& correct_b) {
  if (correct_a.size() != correct_b.size()) {
    throw InputError("mcnemar_test: " + std::to_string(correct_a.size()) + " vs " +
                     std::to_string(correct_b.size()) + " outcomes");
  }
  McNemarResult r;
  for (std::size_t i = 0; i < correct_a.size(); ++i) {
    if (correct_a[i] && !correct_b[i]) ++r.a_only;
    if (!correct_a[i] && correct_b[i]) ++r.b_only;
  }
  const std::size_t discordant = r.a_only + r.b_only;
  if (discordant == 0) return r;
  const double diff = std::abs(static_cast<double>(r.a_only) - static_cast<double>(r.b_only)) - 1.0;
  r.statistic = diff * diff / static_cast<double>(discordant);
  r.significant = r.statistic > kChiSquare1At05;
  return r;
}

std::vector<bool> top1_correct(std::span<const EvalRecord> records) {
  std::vector<bool> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back(!r.ranked.empty() && contains(r.relevant, r.ranked.front()));
  return out;
}

}  // namespace purouter
