#include "purouter/tape.hpp"

#include <string>

#include "purouter/errors.hpp"

namespace purouter::nn {

Var Tape::constant(std::span<const double> values) {
  return push(std::vector<double>(values.begin(), values.end()), nullptr);
}

Var Tape::constant(std::vector<double> values) { return push(std::move(values), nullptr); }

Var Tape::zeros(std::size_t n) { return push(std::vector<double>(n, 0.0), nullptr); }

Var Tape::push(std::vector<double> value, BackwardFn backward) {
  Node node;
  node.value = std::move(value);
  if (record_) node.backward = std::move(backward);
  nodes_.push_back(std::move(node));
  return Var{static_cast<std::uint32_t>(nodes_.size() - 1)};
}

double Tape::scalar(Var v) const {
  const auto& val = nodes_[v.id].value;
  if (val.size() != 1) throw DimensionError("expected a scalar, got " + std::to_string(val.size()) + " values");
  return val[0];
}

std::span<double> Tape::dense_grad(Parameter& p) {
  auto& buf = dense_[&p];
  if (buf.empty()) buf.assign(p.value.size(), 0.0);
  return buf;
}

std::span<double> Tape::row_grad(Parameter& p, std::size_t row) {
  auto& buf = rows_[&p][row];
  if (buf.empty()) buf.assign(p.value.cols(), 0.0);
  return buf;
}

void Tape::backward(Var output) {
  if (!record_) throw UsageError("backward() on a tape created with record=false");
  if (!output.valid() || output.id >= nodes_.size()) throw UsageError("backward() on an invalid variable");
  if (nodes_[output.id].value.size() != 1) {
    throw DimensionError("backward() needs a scalar output, got " +
                         std::to_string(nodes_[output.id].value.size()) + " values");
  }
  dense_.clear();
  rows_.clear();
  for (auto& node : nodes_) node.grad.assign(node.value.size(), 0.0);
  nodes_[output.id].grad[0] = 1.0;

  for (std::size_t i = output.id + 1; i-- > 0;) {
    auto& node = nodes_[i];
    if (!node.backward) continue;
    node.backward(*this, Var{static_cast<std::uint32_t>(i)});
  }

  for (auto& [param, buf] : dense_) {
    auto g = param->grad.data();
    for (std::size_t j = 0; j < buf.size(); ++j) g[j] += buf[j];
  }
  for (auto& [param, rows] : rows_) {
    for (auto& [r, buf] : rows) {
      auto g = param->grad.row(r);
      for (std::size_t j = 0; j < buf.size(); ++j) g[j] += buf[j];
    }
  }
}

}  // namespace purouter::nn
