#include "purouter/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>

#include "purouter/errors.hpp"

namespace purouter::nn {

std::size_t shape_product(const std::vector<std::size_t>& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_string(const std::vector<std::size_t>& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += "x";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

Tensor::Tensor(std::vector<std::size_t> shape) : shape_(std::move(shape)), data_(shape_product(shape_), 0.0) {
  for (auto d : shape_) {
    if (d == 0) throw DimensionError("tensor shape " + shape_string(shape_) + " has a zero dimension");
  }
}

Tensor::Tensor(std::vector<std::size_t> shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  if (shape_product(shape_) != data_.size()) {
    throw DimensionError("tensor shape " + shape_string(shape_) + " does not match " +
                         std::to_string(data_.size()) + " values");
  }
}

Tensor Tensor::vector(std::vector<double> values) {
  const std::size_t n = values.size();
  return Tensor({n}, std::move(values));
}

void Tensor::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

bool Tensor::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

}  // namespace purouter::nn
