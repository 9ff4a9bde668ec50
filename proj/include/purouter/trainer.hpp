#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "purouter/corpus.hpp"
#include "purouter/evaluation.hpp"
#include "purouter/losses.hpp"
#include "purouter/parameter.hpp"
#include "purouter/pseudo_labeler.hpp"
#include "purouter/reranker.hpp"
#include "purouter/shortlister.hpp"

namespace purouter {

struct AblationFlags {
  bool use_pseudo = true;
  bool use_neg_feed = true;
  bool use_self_dist = true;

  /// "base", "base_pseudo", ..., "base_pseudo_neg_feed_self_dist".
  std::string variant_name() const;
  /// Comma-separated subset of no-pseudo, no-neg-feed, no-self-dist, or "none".
  static AblationFlags parse(const std::string& spec);
  friend bool operator==(const AblationFlags&, const AblationFlags&) = default;
};

enum class OptimizerKind { kSgd, kMomentum, kAdam };
OptimizerKind parse_optimizer(const std::string& name);
std::string optimizer_name(OptimizerKind kind);

struct TrainConfig {
  PseudoLabelConfig pseudo;
  losses::LossWeights weights;
  double margin = 0.4;
  std::size_t k = 3;
  int epochs = 15;
  double learning_rate = 0.05;
  std::size_t batch_size = 32;
  std::uint64_t seed = 1;
  AblationFlags ablation;
  OptimizerKind optimizer = OptimizerKind::kSgd;
  double momentum = 0.9;
  double init_range = 0.1;

  std::size_t embed = 32;
  std::size_t hidden = 64;
  std::size_t enable = 32;

  int reranker_epochs = 8;
  double reranker_learning_rate = 0.1;
  std::size_t reranker_embed = 8;
  std::size_t reranker_hidden = 16;
  HingeKind reranker_hinge = HingeKind::kPairwise;

  void validate() const;
};

/// Plain, momentum or Adam updates over every parameter, followed by
/// zeroing the gradients.
class Optimizer {
 public:
  Optimizer(OptimizerKind kind, double learning_rate, double momentum = 0.9);
  void step(nn::ParameterSet& params);

 private:
  OptimizerKind kind_;
  double lr_;
  double momentum_;
  long steps_ = 0;
  std::vector<std::vector<double>> m_, v_;
};

using PseudoMap = std::unordered_map<std::string, std::vector<DomainIndex>>;

struct EpochRecord {
  int epoch = 0;
  losses::LossTerms mean;  // per-batch means, averaged over the epoch
  double alpha = 0.0;
  double combined = 0.0;
  double dev_f1 = 0.0;
  std::size_t pseudo_examples = 0;
  std::size_t pseudo_labels = 0;
  bool teacher_used = false;
  int teacher_epoch = -1;
  double seconds = 0.0;
};

struct TrainState {
  int epoch = 0;
  Shortlister model;
  std::optional<Optimizer> optimizer;
  double best_dev = -1.0;
  int best_epoch = -1;
  nn::ParameterSet best_params;
  PseudoLabeler labeler;
  /// Pseudo sets as they stood at the end of the best-dev epoch.
  PseudoMap best_pseudo;
  std::vector<EpochRecord> history;
};

/// Epoch of the best dev score strictly before `current_epoch` (first
/// maximum wins), or none when no earlier epoch exists.
std::optional<int> select_teacher_epoch(std::span<const double> dev_history, int current_epoch);
/// Best-dev snapshot if it predates the current epoch.
const nn::ParameterSet* select_teacher(const TrainState& state);

using Ranker = std::function<std::vector<DomainIndex>(const LogExample&)>;

std::vector<EvalRecord> ranking_records(const Ranker& rank, std::span<const LogExample> examples);
/// F1 of the top-k rankings against the hidden label sets.
double evaluate_dev(const Ranker& rank, std::span<const LogExample> dev, std::size_t k = 3);
double evaluate_dev(const Shortlister& model, std::span<const LogExample> dev, std::size_t k = 3);

struct ShortlisterHooks {
  /// Called after every epoch; state.best_epoch == record.epoch marks a new best.
  std::function<void(const EpochRecord&, const TrainState&)> on_epoch;
};

TrainState train_shortlister(const LoadedCorpus& data, const TrainConfig& config, const ShortlisterHooks& hooks = {});

ShortlisterDims shortlister_dims(const LoadedCorpus& data, const TrainConfig& config);
RerankerDims reranker_dims(const LoadedCorpus& data, const TrainConfig& config);

struct RerankEpochRecord {
  int epoch = 0;
  double loss = 0.0;
  double dev_f1 = 0.0;
};

struct RerankerRun {
  Reranker model;
  nn::ParameterSet best_params;
  int best_epoch = -1;
  std::size_t total = 0;
  std::size_t usable_without_pseudo = 0;
  std::size_t usable_with_pseudo = 0;
  std::vector<RerankEpochRecord> history;

  double usable_fraction_without() const;
  double usable_fraction_with() const;
};

/// Hinge-loss training on hypotheses from `shortlister`; gold sets use `pseudo`
/// (the best-dev export, empty for variants without pseudo labels).
RerankerRun train_reranker(const LoadedCorpus& data, const Shortlister& shortlister, const PseudoMap& pseudo,
                           const TrainConfig& config);

struct RerankTrace {
  std::string id;
  std::vector<Hypothesis> hypotheses;
  std::vector<double> scores;
  std::vector<std::size_t> gold;
  std::size_t predicted = 0;
};

/// Final single-domain decision for every example.
std::vector<RerankTrace> rerank_examples(const LoadedCorpus& data, const Shortlister& shortlister,
                                         const Reranker& reranker, std::span<const LogExample> examples,
                                         std::size_t k);

struct PseudoPrecision {
  std::size_t labels = 0;
  std::size_t correct = 0;  // labels inside the hidden set
  std::size_t examples_with_labels = 0;
  std::size_t examples = 0;

  double precision() const;
  double coverage() const;
};

/// Oracle check of pseudo labels against the hidden label sets.
PseudoPrecision pseudo_precision(const PseudoMap& pseudo, std::span<const LogExample> positives);

}  // namespace purouter
