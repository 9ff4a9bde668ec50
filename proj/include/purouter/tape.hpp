#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <unordered_map>
#include <vector>

#include "purouter/parameter.hpp"

namespace purouter::nn {

/// Handle to a value recorded on a Tape.
struct Var {
  static constexpr std::uint32_t kNone = static_cast<std::uint32_t>(-1);
  std::uint32_t id = kNone;
  bool valid() const { return id != kNone; }
};

class Tape;
using BackwardFn = std::function<void(Tape&, Var self)>;

/// Reverse-mode computation record.
///
/// Parameters are never copied onto the tape; ops reference them directly and
/// backward accumulates into per-pass buffers that are added to
/// Parameter::grad once at the end of the pass. A parameter therefore receives
/// exactly one addition per backward() call, so replaying a tape twice doubles
/// every gradient bitwise. A given parameter must be reached either only
/// through dense_grad() or only through row_grad() within one tape.
class Tape {
 public:
  explicit Tape(bool record = true) : record_(record) {}

  bool recording() const { return record_; }

  Var constant(std::span<const double> values);
  Var constant(std::vector<double> values);
  Var zeros(std::size_t n);

  /// Appends a node. `backward` is ignored when the tape is not recording.
  Var push(std::vector<double> value, BackwardFn backward);

  std::span<const double> value(Var v) const { return nodes_[v.id].value; }
  double scalar(Var v) const;
  std::size_t size_of(Var v) const { return nodes_[v.id].value.size(); }
  std::size_t node_count() const { return nodes_.size(); }

  /// Gradient of the last backward() output w.r.t. `v`. Valid only during or
  /// after backward().
  std::span<double> grad(Var v) { return nodes_[v.id].grad; }

  /// Per-pass accumulation buffer for a dense parameter.
  std::span<double> dense_grad(Parameter& p);
  /// Per-pass accumulation buffer for one row of a 2-D parameter.
  std::span<double> row_grad(Parameter& p, std::size_t row);

  /// Backpropagates from scalar `output` (seed 1.0) and adds the result to
  /// every reached Parameter::grad.
  void backward(Var output);

 private:
  struct Node {
    std::vector<double> value;
    std::vector<double> grad;
    BackwardFn backward;
  };

  bool record_;
  std::vector<Node> nodes_;
  std::unordered_map<Parameter*, std::vector<double>> dense_;
  std::unordered_map<Parameter*, std::unordered_map<std::size_t, std::vector<double>>> rows_;
};

}  // namespace purouter::nn
