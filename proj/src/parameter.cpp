#include "purouter/parameter.hpp"

#include "purouter/errors.hpp"

namespace purouter::nn {

Parameter::Parameter(std::string n, Tensor v) : name(std::move(n)), value(std::move(v)), grad(value.shape()) {}

ParamId ParameterSet::add(std::string name, std::vector<std::size_t> shape) {
  return add(std::move(name), Tensor(std::move(shape)));
}

ParamId ParameterSet::add(std::string name, Tensor value) {
  if (find(name) != nullptr) throw InputError("duplicate parameter name '" + name + "'");
  params_.emplace_back(std::move(name), std::move(value));
  return ParamId{params_.size() - 1};
}

Parameter* ParameterSet::find(const std::string& name) {
  for (auto& p : params_) {
    if (p.name == name) return &p;
  }
  return nullptr;
}

const Parameter* ParameterSet::find(const std::string& name) const {
  for (const auto& p : params_) {
    if (p.name == name) return &p;
  }
  return nullptr;
}

std::size_t ParameterSet::scalar_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.value.size();
  return n;
}

void ParameterSet::zero_grad() {
  for (auto& p : params_) p.zero_grad();
}

void ParameterSet::init_uniform(std::mt19937_64& rng, double lo, double hi) {
  std::uniform_real_distribution<double> dist(lo, hi);
  for (auto& p : params_) {
    for (auto& v : p.value.storage()) v = dist(rng);
  }
}

void ParameterSet::fill(double v) {
  for (auto& p : params_) p.value.fill(v);
}

void ParameterSet::assign_values(const ParameterSet& other) {
  if (other.size() != size()) throw DimensionError("parameter sets differ in size");
  for (std::size_t i = 0; i < params_.size(); ++i) {
    auto& dst = params_[i];
    const auto& src = other.params_[i];
    if (dst.name != src.name || dst.value.shape() != src.value.shape()) {
      throw DimensionError("parameter '" + src.name + "' " + shape_string(src.value.shape()) +
                           " does not match '" + dst.name + "' " + shape_string(dst.value.shape()));
    }
    dst.value = src.value;
  }
}

bool ParameterSet::values_equal(const ParameterSet& other) const {
  if (other.size() != size()) return false;
  for (std::size_t i = 0; i < params_.size(); ++i) {
    if (params_[i].name != other.params_[i].name || !(params_[i].value == other.params_[i].value)) return false;
  }
  return true;
}

}  // namespace purouter::nn
