#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "purouter/corpus.hpp"
#include "purouter/ops.hpp"
#include "purouter/parameter.hpp"
#include "purouter/shortlister.hpp"
#include "purouter/tape.hpp"

namespace purouter {

struct RerankerDims {
  std::size_t domains = 50;
  std::size_t intents = 1;
  std::size_t slot_types = 1;
  std::size_t domain_embed = 8;
  std::size_t intent_embed = 8;
  std::size_t slot_embed = 8;
  std::size_t hidden = 16;

  /// [shortlister, intent, slot scores ; domain vec ; intent vec ; slot-sum vec]
  std::size_t input_size() const { return 3 + domain_embed + intent_embed + slot_embed; }
};

struct Hypothesis {
  DomainIndex domain = 0;
  double shortlister_score = 0.0;
  double intent_score = 0.0;
  double slot_score = 0.5;
  std::size_t intent = 0;
  std::vector<std::size_t> matched_slots;
  nn::Tensor domain_vec;
  nn::Tensor intent_vec;
  nn::Tensor slot_sum_vec;
};

class Reranker {
 public:
  Reranker(const RerankerDims& dims, std::uint64_t seed, double init_range = 0.1, double margin = 0.4);
  Reranker(const RerankerDims& dims, nn::ParameterSet params, double margin = 0.4);

  const RerankerDims& dims() const { return dims_; }
  double margin() const { return margin_; }
  nn::ParameterSet& params() { return params_; }
  const nn::ParameterSet& params() const { return params_; }

  nn::Parameter& domain_embeddings() { return params_[domain_emb_]; }
  nn::Parameter& intent_embeddings() { return params_[intent_emb_]; }
  nn::Parameter& slot_embeddings() { return params_[slot_emb_]; }
  const nn::Parameter& domain_embeddings() const { return params_[domain_emb_]; }
  const nn::Parameter& intent_embeddings() const { return params_[intent_emb_]; }
  const nn::Parameter& slot_embeddings() const { return params_[slot_emb_]; }

  /// One sigmoid score per hypothesis, BiLSTM-contextualized over the list.
  nn::Var forward(nn::Tape& tape, std::span<const Hypothesis> hypotheses);
  std::vector<double> score(std::span<const Hypothesis> hypotheses) const;

 private:
  void declare();
  nn::Var hypothesis_input(nn::Tape& tape, const Hypothesis& h);

  RerankerDims dims_;
  double margin_;
  nn::ParameterSet params_;
  nn::ParamId domain_emb_, intent_emb_, slot_emb_, fwd_w_, fwd_b_, bwd_w_, bwd_b_, out_w_, out_b_;
};

/// The k most confident shortlister domains, each enriched with the
/// precomputed intent/slot evidence in `features` and the reranker's
/// embedding lookups.
std::vector<Hypothesis> build_hypotheses(const LogExample& example, const PredictionVector& pred,
                                         const DomainCatalog& catalog, const FeatureRow& features,
                                         const Reranker& reranker, std::size_t k);

/// Mean over (gold, non-gold) pairs of max(0, margin - s_g + s_b); 0 when every
/// position is gold. Empty gold set is a UsageError.
double hinge_loss(std::span<const double> scores, std::span<const std::size_t> gold, double margin);
nn::Var hinge_loss(nn::Tape& tape, nn::Var scores, std::span<const std::size_t> gold, double margin);

/// Pointwise alternative: mean over positions of max(0, margin/2 - y_i (s_i - 0.5))
/// with y = +1 for gold and -1 otherwise, so gold scores are pushed above
/// 0.5 + margin/2 and the rest below 0.5 - margin/2.
double pointwise_hinge_loss(std::span<const double> scores, std::span<const std::size_t> gold, double margin);
nn::Var pointwise_hinge_loss(nn::Tape& tape, nn::Var scores, std::span<const std::size_t> gold, double margin);

enum class HingeKind { kPairwise, kPointwise };
HingeKind parse_hinge(const std::string& name);
std::string hinge_name(HingeKind kind);

/// Positions whose domain is the ground truth or one of the pseudo labels.
std::vector<std::size_t> rerank_targets(std::span<const Hypothesis> hypotheses, DomainIndex ground_truth,
                                        std::span<const DomainIndex> pseudo);

/// argmax position; ties go to the lower position.
std::size_t rerank_choice(std::span<const double> scores);

}  // namespace purouter
