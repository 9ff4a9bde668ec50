#pragma once

#include <stdexcept>
#include <string>

namespace purouter {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Shape disagreement between operands.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// Bad caller-supplied data (out-of-vocabulary token, k out of range, ...).
class InputError : public Error {
 public:
  using Error::Error;
};

// A domain invariant would be broken (e.g. ground truth inside a pseudo set).
class InvariantError : public Error {
 public:
  using Error::Error;
};

// NaN/Inf where a finite value is required.
class NumericError : public Error {
 public:
  using Error::Error;
};

// API called out of order.
class UsageError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

// Prerequisite artifacts are missing.
class DependencyError : public Error {
 public:
  using Error::Error;
};

}  // namespace purouter
