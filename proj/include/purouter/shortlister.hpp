#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "purouter/corpus.hpp"
#include "purouter/ops.hpp"
#include "purouter/parameter.hpp"
#include "purouter/tape.hpp"

namespace purouter {

struct ShortlisterDims {
  std::size_t vocab = 5000;
  std::size_t embed = 32;    // word embedding size
  std::size_t hidden = 64;   // per-direction LSTM size
  std::size_t enable = 32;   // enablement embedding size
  std::size_t domains = 50;  // n

  std::size_t utterance_size() const { return 2 * hidden; }
  std::size_t feature_size() const { return 2 * hidden + enable; }
};

/// Sigmoid confidences for the n domains plus the logits they came from.
struct PredictionVector {
  std::vector<double> values;
  std::vector<double> logits;
};

using RankedDomains = std::vector<std::pair<DomainIndex, double>>;

/// The k largest entries, descending; ties go to the lower index.
RankedDomains top_k(std::span<const double> pred, std::size_t k);

/// BiLSTM utterance encoder + enablement attention + sigmoid output layer.
class Shortlister {
 public:
  Shortlister(const ShortlisterDims& dims, std::uint64_t seed, double init_range = 0.1);
  /// Wraps loaded parameters; names and shapes must match `dims`.
  Shortlister(const ShortlisterDims& dims, nn::ParameterSet params);

  const ShortlisterDims& dims() const { return dims_; }
  nn::ParameterSet& params() { return params_; }
  const nn::ParameterSet& params() const { return params_; }

  nn::Parameter& word_embeddings() { return params_[word_emb_]; }
  nn::Parameter& enablement_embeddings() { return params_[enable_emb_]; }
  nn::Parameter& attention() { return params_[attention_]; }
  nn::Parameter& output_weights() { return params_[out_w_]; }
  nn::Parameter& output_bias() { return params_[out_b_]; }
  nn::LstmWeights forward_lstm();
  nn::LstmWeights backward_lstm();

  /// [last forward hidden state ; last backward hidden state], length 2h.
  nn::Var encode_utterance(nn::Tape& tape, std::span<const TokenId> tokens);
  /// sigmoid(sum_i softmax(u^T A v_i) v_i) over enabled domains; zeros(e) if none.
  nn::Var enablement_attention(nn::Tape& tape, nn::Var utterance, std::span<const DomainIndex> enabled);

  struct Output {
    nn::Var logits;
    nn::Var probs;
  };
  Output forward(nn::Tape& tape, const LogExample& example);

  /// Inference on a non-recording tape.
  PredictionVector predict(const LogExample& example) const;

 private:
  void declare();

  ShortlisterDims dims_;
  nn::ParameterSet params_;
  nn::ParamId word_emb_, fwd_w_, fwd_b_, bwd_w_, bwd_b_, enable_emb_, attention_, out_w_, out_b_;
};

}  // namespace purouter
