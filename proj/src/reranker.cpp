#include "purouter/reranker.hpp"

#include <algorithm>
#include <random>
#include <string>

#include "purouter/errors.hpp"

namespace purouter {

Reranker::Reranker(const RerankerDims& dims, std::uint64_t seed, double init_range, double margin)
    : dims_(dims), margin_(margin) {
  declare();
  std::mt19937_64 rng(seed);
  params_.init_uniform(rng, -init_range, init_range);
}

Reranker::Reranker(const RerankerDims& dims, nn::ParameterSet params, double margin) : dims_(dims), margin_(margin) {
  declare();
  params_.assign_values(params);
}

void Reranker::declare() {
  if (!(margin_ > 0.0)) throw ConfigError("reranker margin must be > 0");
  const auto& d = dims_;
  if (d.domains == 0 || d.intents == 0 || d.slot_types == 0 || d.hidden == 0) {
    throw ConfigError("reranker dimensions must be positive");
  }
  domain_emb_ = params_.add("domain_embeddings", {d.domains, d.domain_embed});
  intent_emb_ = params_.add("intent_embeddings", {d.intents, d.intent_embed});
  slot_emb_ = params_.add("slot_embeddings", {d.slot_types, d.slot_embed});
  fwd_w_ = params_.add("fwd_lstm.w", {d.input_size() + d.hidden, 4 * d.hidden});
  fwd_b_ = params_.add("fwd_lstm.b", {4 * d.hidden});
  bwd_w_ = params_.add("bwd_lstm.w", {d.input_size() + d.hidden, 4 * d.hidden});
  bwd_b_ = params_.add("bwd_lstm.b", {4 * d.hidden});
  out_w_ = params_.add("score.w", {2 * d.hidden, 1});
  out_b_ = params_.add("score.b", {1});
}

nn::Var Reranker::hypothesis_input(nn::Tape& tape, const Hypothesis& h) {
  if (h.domain >= dims_.domains) throw InputError("hypothesis domain " + std::to_string(h.domain) + " unknown");
  if (h.intent >= dims_.intents) throw InputError("hypothesis intent " + std::to_string(h.intent) + " unknown");
  const nn::Var scores = tape.constant(std::vector<double>{h.shortlister_score, h.intent_score, h.slot_score});
  const nn::Var dvec = nn::embedding(tape, domain_embeddings(), h.domain);
  const nn::Var ivec = nn::embedding(tape, intent_embeddings(), h.intent);
  nn::Var svec;
  if (h.matched_slots.empty()) {
    svec = tape.zeros(dims_.slot_embed);
  } else {
    std::vector<nn::Var> slots;
    for (auto s : h.matched_slots) {
      if (s >= dims_.slot_types) throw InputError("hypothesis slot type " + std::to_string(s) + " unknown");
      slots.push_back(nn::embedding(tape, slot_embeddings(), s));
    }
    svec = nn::sum(tape, slots);
  }
  const nn::Var parts[] = {scores, dvec, ivec, svec};
  return nn::concat(tape, parts);
}

nn::Var Reranker::forward(nn::Tape& tape, std::span<const Hypothesis> hypotheses) {
  if (hypotheses.empty()) throw DimensionError("rerank_forward: no hypotheses");
  std::vector<nn::Var> xs;
  for (const auto& h : hypotheses) xs.push_back(hypothesis_input(tape, h));

  const std::size_t k = xs.size();
  const std::size_t hd = dims_.hidden;
  const nn::LstmWeights fwd{&params_[fwd_w_], &params_[fwd_b_], dims_.input_size(), hd};
  const nn::LstmWeights bwd{&params_[bwd_w_], &params_[bwd_b_], dims_.input_size(), hd};

  std::vector<nn::Var> hf(k);
  std::vector<nn::Var> hb(k);
  nn::Var state = tape.zeros(2 * hd);
  for (std::size_t t = 0; t < k; ++t) {
    state = nn::lstm_step(tape, xs[t], state, fwd);
    hf[t] = nn::slice(tape, state, 0, hd);
  }
  state = tape.zeros(2 * hd);
  for (std::size_t t = k; t-- > 0;) {
    state = nn::lstm_step(tape, xs[t], state, bwd);
    hb[t] = nn::slice(tape, state, 0, hd);
  }
  std::vector<nn::Var> scores;
  for (std::size_t t = 0; t < k; ++t) {
    const nn::Var parts[] = {hf[t], hb[t]};
    const nn::Var ctx = nn::concat(tape, parts);
    scores.push_back(nn::sigmoid(tape, nn::affine(tape, ctx, params_[out_w_], params_[out_b_])));
  }
  return nn::concat(tape, scores);
}

std::vector<double> Reranker::score(std::span<const Hypothesis> hypotheses) const {
  // A non-recording tape never writes to parameters.
  auto& self = const_cast<Reranker&>(*this);
  nn::Tape tape(false);
  const auto v = tape.value(self.forward(tape, hypotheses));
  return {v.begin(), v.end()};
}

std::vector<Hypothesis> build_hypotheses(const LogExample& example, const PredictionVector& pred,
                                         const DomainCatalog& catalog, const FeatureRow& features,
                                         const Reranker& reranker, std::size_t k) {
  if (features.intent_scores.size() != catalog.n() || features.slot_scores.size() != catalog.n()) {
    throw DimensionError("features for " + example.id + " do not cover " + std::to_string(catalog.n()) +
                         " domains");
  }
  const auto ranked = top_k(pred.values, k);
  std::vector<Hypothesis> out;
  out.reserve(k);
  for (const auto& [d, conf] : ranked) {
    Hypothesis h;
    h.domain = d;
    h.shortlister_score = conf;
    h.intent_score = features.intent_scores[d];
    h.slot_score = features.slot_scores[d];
    h.intent = catalog.primary_intent(d);
    const auto& dom_slots = catalog.domains[d].slot_types;
    for (auto s : features.slot_types) {
      if (std::binary_search(dom_slots.begin(), dom_slots.end(), s)) h.matched_slots.push_back(s);
    }
    if (h.matched_slots.empty()) h.slot_score = 0.5;

    const auto dv = reranker.domain_embeddings().value.row(d);
    h.domain_vec = nn::Tensor::vector({dv.begin(), dv.end()});
    const auto iv = reranker.intent_embeddings().value.row(h.intent);
    h.intent_vec = nn::Tensor::vector({iv.begin(), iv.end()});
    h.slot_sum_vec = nn::Tensor({reranker.dims().slot_embed});
    for (auto s : h.matched_slots) {
      const auto sv = reranker.slot_embeddings().value.row(s);
      for (std::size_t i = 0; i < sv.size(); ++i) h.slot_sum_vec[i] += sv[i];
    }
    out.push_back(std::move(h));
  }
  return out;
}

namespace {

void check_gold(std::size_t k, std::span<const std::size_t> gold) {
  if (gold.empty()) throw UsageError("hinge_loss: empty gold set (skip the example instead)");
  for (auto g : gold) {
    if (g >= k) throw InputError("hinge_loss: gold position " + std::to_string(g) + " >= k " + std::to_string(k));
  }
}

std::vector<bool> gold_mask(std::size_t k, std::span<const std::size_t> gold) {
  std::vector<bool> mask(k, false);
  for (auto g : gold) mask[g] = true;
  return mask;
}

}  // namespace

double hinge_loss(std::span<const double> scores, std::span<const std::size_t> gold, double margin) {
  check_gold(scores.size(), gold);
  const auto mask = gold_mask(scores.size(), gold);
  double total = 0.0;
  std::size_t pairs = 0;
  for (std::size_t g = 0; g < scores.size(); ++g) {
    if (!mask[g]) continue;
    for (std::size_t b = 0; b < scores.size(); ++b) {
      if (mask[b]) continue;
      total += std::max(0.0, margin - scores[g] + scores[b]);
      ++pairs;
    }
  }
  return pairs == 0 ? 0.0 : total / static_cast<double>(pairs);
}

nn::Var hinge_loss(nn::Tape& tape, nn::Var scores, std::span<const std::size_t> gold, double margin) {
  const auto sv = tape.value(scores);
  const double value = hinge_loss(sv, gold, margin);
  auto mask = gold_mask(sv.size(), gold);
  return tape.push({value}, [scores, margin, mask = std::move(mask)](nn::Tape& t, nn::Var self) {
    const double g = t.grad(self)[0];
    const auto s = t.value(scores);
    auto gs = t.grad(scores);
    std::size_t pairs = 0;
    for (std::size_t i = 0; i < mask.size(); ++i) {
      for (std::size_t j = 0; j < mask.size(); ++j) pairs += (mask[i] && !mask[j]) ? 1 : 0;
    }
    if (pairs == 0) return;
    const double w = g / static_cast<double>(pairs);
    for (std::size_t i = 0; i < mask.size(); ++i) {
      if (!mask[i]) continue;
      for (std::size_t j = 0; j < mask.size(); ++j) {
        if (mask[j] || margin - s[i] + s[j] <= 0.0) continue;
        gs[i] -= w;
        gs[j] += w;
      }
    }
  });
}

double pointwise_hinge_loss(std::span<const double> scores, std::span<const std::size_t> gold, double margin) {
  check_gold(scores.size(), gold);
  const auto mask = gold_mask(scores.size(), gold);
  double total = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const double y = mask[i] ? 1.0 : -1.0;
    total += std::max(0.0, 0.5 * margin - y * (scores[i] - 0.5));
  }
  return total / static_cast<double>(scores.size());
}

nn::Var pointwise_hinge_loss(nn::Tape& tape, nn::Var scores, std::span<const std::size_t> gold, double margin) {
  const auto sv = tape.value(scores);
  const double value = pointwise_hinge_loss(sv, gold, margin);
  auto mask = gold_mask(sv.size(), gold);
  return tape.push({value}, [scores, margin, mask = std::move(mask)](nn::Tape& t, nn::Var self) {
    const double w = t.grad(self)[0] / static_cast<double>(mask.size());
    const auto s = t.value(scores);
    auto gs = t.grad(scores);
    for (std::size_t i = 0; i < mask.size(); ++i) {
      const double y = mask[i] ? 1.0 : -1.0;
      if (0.5 * margin - y * (s[i] - 0.5) > 0.0) gs[i] -= y * w;
    }
  });
}

HingeKind parse_hinge(const std::string& name) {
  if (name == "pairwise") return HingeKind::kPairwise;
  if (name == "pointwise") return HingeKind::kPointwise;
  throw ConfigError("reranker_hinge: unknown value '" + name + "' (pairwise, pointwise)");
}

std::string hinge_name(HingeKind kind) { return kind == HingeKind::kPointwise ? "pointwise" : "pairwise"; }

std::vector<std::size_t> rerank_targets(std::span<const Hypothesis> hypotheses, DomainIndex ground_truth,
                                        std::span<const DomainIndex> pseudo) {
  std::vector<std::size_t> gold;
  for (std::size_t i = 0; i < hypotheses.size(); ++i) {
    const auto d = hypotheses[i].domain;
    if (d == ground_truth || std::find(pseudo.begin(), pseudo.end(), d) != pseudo.end()) gold.push_back(i);
  }
  return gold;
}

std::size_t rerank_choice(std::span<const double> scores) {
  if (scores.empty()) throw InputError("rerank_choice: no scores");
  std::size_t best = 0;
  for (std::size_t i = 1; i < scores.size(); ++i) {
    if (scores[i] > scores[best]) best = i;
  }
  return best;
}

}  // namespace purouter
