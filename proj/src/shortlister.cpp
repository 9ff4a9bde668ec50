#include "purouter/shortlister.hpp"

#include <algorithm>
#include <numeric>
#include <random>
#include <string>

#include "purouter/errors.hpp"

namespace purouter {

RankedDomains top_k(std::span<const double> pred, std::size_t k) {
  if (k < 1 || k > pred.size()) {
    throw InputError("top_k: k=" + std::to_string(k) + " outside [1, " + std::to_string(pred.size()) + "]");
  }
  std::vector<DomainIndex> idx(pred.size());
  std::iota(idx.begin(), idx.end(), DomainIndex{0});
  std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k), idx.end(),
                    [&](DomainIndex a, DomainIndex b) { return pred[a] > pred[b] || (pred[a] == pred[b] && a < b); });
  RankedDomains out;
  out.reserve(k);
  for (std::size_t i = 0; i < k; ++i) out.emplace_back(idx[i], pred[idx[i]]);
  return out;
}

Shortlister::Shortlister(const ShortlisterDims& dims, std::uint64_t seed, double init_range) : dims_(dims) {
  declare();
  std::mt19937_64 rng(seed);
  params_.init_uniform(rng, -init_range, init_range);
}

Shortlister::Shortlister(const ShortlisterDims& dims, nn::ParameterSet params) : dims_(dims) {
  declare();
  params_.assign_values(params);
}

void Shortlister::declare() {
  const auto& d = dims_;
  if (d.vocab == 0 || d.embed == 0 || d.hidden == 0 || d.enable == 0 || d.domains == 0) {
    throw ConfigError("shortlister dimensions must be positive");
  }
  word_emb_ = params_.add("word_embeddings", {d.vocab, d.embed});
  fwd_w_ = params_.add("fwd_lstm.w", {d.embed + d.hidden, 4 * d.hidden});
  fwd_b_ = params_.add("fwd_lstm.b", {4 * d.hidden});
  bwd_w_ = params_.add("bwd_lstm.w", {d.embed + d.hidden, 4 * d.hidden});
  bwd_b_ = params_.add("bwd_lstm.b", {4 * d.hidden});
  enable_emb_ = params_.add("enablement_embeddings", {d.domains, d.enable});
  attention_ = params_.add("attention", {d.utterance_size(), d.enable});
  out_w_ = params_.add("output.w", {d.feature_size(), d.domains});
  out_b_ = params_.add("output.b", {d.domains});
}

nn::LstmWeights Shortlister::forward_lstm() {
  return {&params_[fwd_w_], &params_[fwd_b_], dims_.embed, dims_.hidden};
}

nn::LstmWeights Shortlister::backward_lstm() {
  return {&params_[bwd_w_], &params_[bwd_b_], dims_.embed, dims_.hidden};
}

nn::Var Shortlister::encode_utterance(nn::Tape& tape, std::span<const TokenId> tokens) {
  if (tokens.empty()) throw InputError("encode_utterance: empty utterance");
  for (auto t : tokens) {
    if (t >= dims_.vocab) {
      throw InputError("encode_utterance: token " + std::to_string(t) + " outside vocabulary of " +
                       std::to_string(dims_.vocab));
    }
  }
  auto& emb = word_embeddings();
  std::vector<nn::Var> xs;
  xs.reserve(tokens.size());
  for (auto t : tokens) xs.push_back(nn::embedding(tape, emb, t));

  const auto fwd = forward_lstm();
  nn::Var state = tape.zeros(2 * dims_.hidden);
  for (auto x : xs) state = nn::lstm_step(tape, x, state, fwd);
  const nn::Var h_fwd = nn::slice(tape, state, 0, dims_.hidden);

  const auto bwd = backward_lstm();
  state = tape.zeros(2 * dims_.hidden);
  for (auto it = xs.rbegin(); it != xs.rend(); ++it) state = nn::lstm_step(tape, *it, state, bwd);
  const nn::Var h_bwd = nn::slice(tape, state, 0, dims_.hidden);

  const nn::Var parts[] = {h_fwd, h_bwd};
  return nn::concat(tape, parts);
}

nn::Var Shortlister::enablement_attention(nn::Tape& tape, nn::Var utterance, std::span<const DomainIndex> enabled) {
  if (enabled.empty()) return tape.zeros(dims_.enable);
  auto& table = enablement_embeddings();
  const nn::Var query = nn::linear(tape, utterance, attention());
  std::vector<nn::Var> vecs;
  std::vector<nn::Var> scores;
  vecs.reserve(enabled.size());
  scores.reserve(enabled.size());
  for (auto d : enabled) {
    if (d >= dims_.domains) throw InputError("enablement_attention: unknown domain " + std::to_string(d));
    vecs.push_back(nn::embedding(tape, table, d));
    scores.push_back(nn::dot(tape, query, vecs.back()));
  }
  const nn::Var weights = nn::softmax(tape, nn::concat(tape, scores));
  return nn::sigmoid(tape, nn::weighted_sum(tape, weights, vecs));
}

Shortlister::Output Shortlister::forward(nn::Tape& tape, const LogExample& example) {
  const nn::Var u = encode_utterance(tape, example.tokens);
  const nn::Var a = enablement_attention(tape, u, example.enabled);
  const nn::Var parts[] = {u, a};
  const nn::Var z = nn::concat(tape, parts);
  const nn::Var logits = nn::affine(tape, z, output_weights(), output_bias());
  return {logits, nn::sigmoid(tape, logits)};
}

PredictionVector Shortlister::predict(const LogExample& example) const {
  // A non-recording tape never writes to parameters.
  auto& self = const_cast<Shortlister&>(*this);
  nn::Tape tape(false);
  const auto out = self.forward(tape, example);
  const auto l = tape.value(out.logits);
  const auto p = tape.value(out.probs);
  return {std::vector<double>(p.begin(), p.end()), std::vector<double>(l.begin(), l.end())};
}

}  // namespace purouter
