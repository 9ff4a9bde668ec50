#pragma once

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "purouter/parameter.hpp"
#include "purouter/tape.hpp"

namespace purouter::nn {

/// output_i = b_i + sum_j x_j * W(j, i), with W of shape [m x h].
Var affine(Tape& tape, Var x, Parameter& w, Parameter& b);
/// output_i = sum_j x_j * W(j, i).
Var linear(Tape& tape, Var x, Parameter& w);
/// Row `row` of a [rows x cols] table. Gradient is accumulated sparsely.
Var embedding(Tape& tape, Parameter& table, std::size_t row);

double sigmoid(double x);
Var sigmoid(Tape& tape, Var x);
Var tanh(Tape& tape, Var x);

Var add(Tape& tape, Var a, Var b);
Var mul(Tape& tape, Var a, Var b);
Var scale(Tape& tape, Var a, double factor);

Var concat(Tape& tape, std::span<const Var> parts);
Var slice(Tape& tape, Var x, std::size_t offset, std::size_t length);

Var dot(Tape& tape, Var a, Var b);
Var softmax(Tape& tape, Var x);
/// sum_i weights_i * vectors_i, all vectors of equal length.
Var weighted_sum(Tape& tape, Var weights, std::span<const Var> vectors);
/// Elementwise sum of equal-length vectors; an empty list is not allowed.
Var sum(Tape& tape, std::span<const Var> vectors);
/// sum_i coeffs_i * scalars_i.
Var lincomb(Tape& tape, std::span<const Var> scalars, std::span<const double> coeffs);

/// Fused LSTM weights: W is [(input + hidden) x 4*hidden] with gate column
/// blocks ordered input, forget, candidate, output; b is [4*hidden].
struct LstmWeights {
  Parameter* w = nullptr;
  Parameter* b = nullptr;
  std::size_t input = 0;
  std::size_t hidden = 0;
};

/// One LSTM step on a packed state [h; c] of length 2*hidden.
Var lstm_step(Tape& tape, Var x, Var state, const LstmWeights& weights);

/// Unpacked form of lstm_step.
std::pair<Var, Var> lstm_cell(Tape& tape, Var x, Var h_prev, Var c_prev, const LstmWeights& weights);

}  // namespace purouter::nn
