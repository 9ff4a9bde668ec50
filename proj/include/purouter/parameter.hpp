#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "purouter/tensor.hpp"

namespace purouter::nn {

struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;

  Parameter(std::string name, Tensor value);
  void zero_grad() { grad.fill(0.0); }
};

/// Index of a parameter inside its ParameterSet. Stays valid across copies of
/// the set, which is what lets models be snapshotted by value.
struct ParamId {
  std::size_t index = static_cast<std::size_t>(-1);
  friend bool operator==(ParamId, ParamId) = default;
};

class ParameterSet {
 public:
  ParamId add(std::string name, std::vector<std::size_t> shape);
  ParamId add(std::string name, Tensor value);

  Parameter& operator[](ParamId id) { return params_.at(id.index); }
  const Parameter& operator[](ParamId id) const { return params_.at(id.index); }

  Parameter* find(const std::string& name);
  const Parameter* find(const std::string& name) const;

  std::size_t size() const { return params_.size(); }
  std::size_t scalar_count() const;

  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }

  void zero_grad();
  void init_uniform(std::mt19937_64& rng, double lo, double hi);
  void fill(double v);

  /// Copies values from `other`, which must have identical names and shapes.
  void assign_values(const ParameterSet& other);

  bool values_equal(const ParameterSet& other) const;

 private:
  std::vector<Parameter> params_;
};

}  // namespace purouter::nn
