#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace purouter::nn {

/// Dense row-major tensor of doubles.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> shape);
  Tensor(std::vector<std::size_t> shape, std::vector<double> data);

  static Tensor vector(std::vector<double> values);

  const std::vector<std::size_t>& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t size() const { return data_.size(); }
  std::size_t rows() const { return shape_.empty() ? 0 : shape_.front(); }
  std::size_t cols() const { return shape_.size() < 2 ? 1 : shape_[1]; }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }
  std::vector<double>& storage() { return data_; }
  const std::vector<double>& storage() const { return data_; }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }
  double& at(std::size_t r, std::size_t c) { return data_[r * cols() + c]; }
  double at(std::size_t r, std::size_t c) const { return data_[r * cols() + c]; }

  std::span<double> row(std::size_t r) { return std::span<double>(data_).subspan(r * cols(), cols()); }
  std::span<const double> row(std::size_t r) const {
    return std::span<const double>(data_).subspan(r * cols(), cols());
  }

  void fill(double v);
  bool all_finite() const;

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  std::vector<std::size_t> shape_;
  std::vector<double> data_;
};

std::string shape_string(const std::vector<std::size_t>& shape);
std::size_t shape_product(const std::vector<std::size_t>& shape);

}  // namespace purouter::nn
