#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "purouter/corpus.hpp"
#include "purouter/losses.hpp"

namespace purouter {

struct PseudoLabelConfig {
  std::size_t max_labels = 2;       // p
  std::size_t required_streak = 4;  // r
  /// Keep a derived label after its streak breaks (capped at max_labels).
  bool persistent = false;
};

/// Per-example record of how many consecutive epochs each domain has been
/// predicted strictly above the known ground truth, and the pseudo labels
/// derived from those streaks.
class PseudoLabeler {
 public:
  PseudoLabeler(const PseudoLabelConfig& config, std::size_t n_domains);

  const PseudoLabelConfig& config() const { return config_; }

  /// Records one epoch of predictions for `id`. Epochs must strictly increase
  /// per example; observing the same epoch twice is a UsageError.
  void observe_epoch(const std::string& id, int epoch, std::span<const double> pred, DomainIndex ground_truth);

  /// Recomputes the pseudo set of `id` from its streaks: domains with
  /// streak >= r, the p most confident under `pred`, ties to the lower index.
  const std::vector<DomainIndex>& derive_pseudo_labels(const std::string& id, std::span<const double> pred);

  /// Current pseudo set; empty for unseen ids.
  const std::vector<DomainIndex>& pseudo_labels(const std::string& id) const;
  std::size_t streak(const std::string& id, DomainIndex d) const;

  std::size_t examples_with_labels() const;
  std::size_t total_labels() const;

 private:
  struct ExampleState {
    std::vector<std::size_t> streaks;
    std::vector<DomainIndex> pseudo;
    DomainIndex ground_truth = 0;
    int last_observed = -1;
    int last_derived = -1;
  };

  PseudoLabelConfig config_;
  std::size_t n_;
  std::unordered_map<std::string, ExampleState> state_;
};

/// n-hot target with ones at the ground truth and every pseudo label.
losses::TargetVector target_vector(DomainIndex ground_truth, std::span<const DomainIndex> pseudo, std::size_t n);

}  // namespace purouter
