#pragma once

#include <vector>

#include "purouter/losses.hpp"
#include "purouter/pseudo_labeler.hpp"
#include "purouter/reranker.hpp"
#include "purouter/shortlister.hpp"

namespace fixture {

/// d=4, h=4, n=6 shortlister with one positive utterance carrying a pseudo
/// label, a fixed teacher and a negative utterance routed to its top domain.
struct CompositeCase {
  purouter::Shortlister model;
  purouter::LogExample positive;
  purouter::LogExample negative;
  std::vector<double> target;
  std::vector<double> soft_teacher;
  int epoch = 3;
  purouter::losses::LossWeights weights;

  explicit CompositeCase(std::uint64_t seed = 7, double beta = 0.00025)
      : model(dims(), seed, 0.5) {
    using namespace purouter;
    positive.id = "p";
    positive.tokens = {1, 5, 7, 2};
    positive.enabled = {0, 2, 3};
    positive.ground_truth = 2;
    negative.id = "n";
    negative.tokens = {4, 3, 9};
    negative.enabled = {1, 4};
    negative.polarity = Polarity::kNegative;
    // route the negative to whatever the model currently ranks first
    negative.ground_truth = top_k(model.predict(negative).values, 1).front().first;
    target = target_vector(2, std::vector<DomainIndex>{4}, 6).values;
    const Shortlister teacher(dims(), seed + 1, 0.5);
    soft_teacher = losses::soften_teacher(teacher.predict(positive).logits, weights.distill_temperature);
    weights.beta = beta;
  }

  static purouter::ShortlisterDims dims() {
    purouter::ShortlisterDims d;
    d.vocab = 12;
    d.embed = 4;
    d.hidden = 4;
    d.enable = 4;
    d.domains = 6;
    return d;
  }

  purouter::nn::Var loss(purouter::nn::Tape& t) {
    using namespace purouter;
    const auto out = model.forward(t, positive);
    const auto y = losses::TargetVector::one_hot(positive.ground_truth, 6);
    const nn::Var lb = losses::bce(t, out.probs, y.values);
    const nn::Var ld = losses::bce(t, out.probs, target);
    const nn::Var ls = losses::bce(t, out.probs, soft_teacher);
    const nn::Var ln = losses::negative_feedback_loss(t, model.forward(t, negative).probs, negative.ground_truth);
    return losses::combined_loss(t, lb, ld, ls, ln, epoch, weights);
  }
};

inline purouter::Hypothesis hyp(purouter::DomainIndex domain, double ss, double is, double vs, std::size_t intent,
                                std::vector<std::size_t> slots) {
  purouter::Hypothesis h;
  h.domain = domain;
  h.shortlister_score = ss;
  h.intent_score = is;
  h.slot_score = vs;
  h.intent = intent;
  h.matched_slots = std::move(slots);
  return h;
}

/// Two k=3 hypothesis lists for a small reranker, with hand-picked features.
inline std::vector<std::vector<purouter::Hypothesis>> reranker_batch() {
  using purouter::Hypothesis;
  std::vector<Hypothesis> a(3), b(3);
  a[0] = hyp(2, 0.9, 0.7, 0.6, 1, {0, 2});
  a[1] = hyp(0, 0.5, 0.2, 0.5, 4, {});
  a[2] = hyp(5, 0.1, 0.9, 0.3, 0, {1});
  b[0] = hyp(1, 0.8, 0.3, 0.5, 2, {});
  b[1] = hyp(3, 0.6, 0.85, 0.7, 3, {2});
  b[2] = hyp(4, 0.4, 0.6, 0.2, 1, {0, 1});
  return {a, b};
}

inline purouter::RerankerDims tiny_reranker_dims() {
  purouter::RerankerDims d;
  d.domains = 6;
  d.intents = 5;
  d.slot_types = 3;
  d.domain_embed = 4;
  d.intent_embed = 4;
  d.slot_embed = 4;
  d.hidden = 4;
  return d;
}

}  // namespace fixture
