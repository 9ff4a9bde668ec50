#include "purouter/pseudo_labeler.hpp"

#include <algorithm>

#include "purouter/errors.hpp"

namespace purouter {
namespace {

const std::vector<DomainIndex> kEmpty;

}  // namespace

PseudoLabeler::PseudoLabeler(const PseudoLabelConfig& config, std::size_t n_domains)
    : config_(config), n_(n_domains) {
  if (config_.max_labels == 0) throw ConfigError("pseudo labels: p must be >= 1");
  if (config_.required_streak == 0) throw ConfigError("pseudo labels: r must be >= 1");
}

void PseudoLabeler::observe_epoch(const std::string& id, int epoch, std::span<const double> pred,
                                  DomainIndex ground_truth) {
  if (pred.size() != n_) {
    throw DimensionError("observe_epoch: prediction [" + std::to_string(pred.size()) + "] vs n " +
                         std::to_string(n_));
  }
  if (ground_truth >= n_) throw InputError("observe_epoch: ground truth out of range");
  auto& st = state_[id];
  if (st.streaks.empty()) st.streaks.assign(n_, 0);
  if (epoch <= st.last_observed) {
    throw UsageError("observe_epoch: example " + id + " already observed at epoch " +
                     std::to_string(st.last_observed));
  }
  st.last_observed = epoch;
  st.ground_truth = ground_truth;
  const double gt = pred[ground_truth];
  for (std::size_t d = 0; d < n_; ++d) {
    if (d != ground_truth && pred[d] > gt) {
      ++st.streaks[d];
    } else {
      st.streaks[d] = 0;
    }
  }
}

const std::vector<DomainIndex>& PseudoLabeler::derive_pseudo_labels(const std::string& id,
                                                                    std::span<const double> pred) {
  const auto it = state_.find(id);
  if (it == state_.end()) return kEmpty;
  auto& st = it->second;
  if (st.last_derived >= st.last_observed) {
    throw UsageError("derive_pseudo_labels: example " + id + " not observed since last derivation");
  }
  st.last_derived = st.last_observed;

  auto by_confidence = [&](DomainIndex a, DomainIndex b) {
    return pred[a] > pred[b] || (pred[a] == pred[b] && a < b);
  };

  std::vector<DomainIndex> candidates;
  for (std::size_t d = 0; d < n_; ++d) {
    if (st.streaks[d] >= config_.required_streak) candidates.push_back(d);
  }
  std::sort(candidates.begin(), candidates.end(), by_confidence);

  std::vector<DomainIndex> next;
  if (config_.persistent) {
    next = st.pseudo;
    for (auto d : candidates) {
      if (next.size() >= config_.max_labels) break;
      if (std::find(next.begin(), next.end(), d) == next.end()) next.push_back(d);
    }
  } else {
    const std::size_t keep = std::min(candidates.size(), config_.max_labels);
    next.assign(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(keep));
  }
  std::sort(next.begin(), next.end());
  st.pseudo = std::move(next);
  return st.pseudo;
}

const std::vector<DomainIndex>& PseudoLabeler::pseudo_labels(const std::string& id) const {
  const auto it = state_.find(id);
  return it == state_.end() ? kEmpty : it->second.pseudo;
}

std::size_t PseudoLabeler::streak(const std::string& id, DomainIndex d) const {
  const auto it = state_.find(id);
  return it == state_.end() ? 0 : it->second.streaks.at(d);
}

std::size_t PseudoLabeler::examples_with_labels() const {
  return static_cast<std::size_t>(
      std::count_if(state_.begin(), state_.end(), [](const auto& kv) { return !kv.second.pseudo.empty(); }));
}

std::size_t PseudoLabeler::total_labels() const {
  std::size_t n = 0;
  for (const auto& [id, st] : state_) n += st.pseudo.size();
  return n;
}

losses::TargetVector target_vector(DomainIndex ground_truth, std::span<const DomainIndex> pseudo, std::size_t n) {
  auto y = losses::TargetVector::one_hot(ground_truth, n);
  for (auto d : pseudo) {
    if (d == ground_truth) {
      throw InvariantError("target_vector: pseudo label " + std::to_string(d) + " equals the ground truth");
    }
    if (d >= n) throw InputError("target_vector: pseudo label " + std::to_string(d) + " out of range");
    y.values[d] = 1.0;
  }
  if (!pseudo.empty()) y.source = losses::TargetVector::Source::kMultiHot;
  return y;
}

}  // namespace purouter
