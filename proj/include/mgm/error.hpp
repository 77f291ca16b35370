#pragma once

#include <stdexcept>
#include <string>

namespace mgm {

/// Root of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Caller supplied data that breaks a documented invariant.
class ValidationError : public Error {
 public:
  ValidationError(std::string field, const std::string& what)
      : Error(field + ": " + what), field_(std::move(field)) {}

  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

/// Bad or missing input that is not a numerical problem (files, ids, config).
class InputError : public Error {
 public:
  using Error::Error;
};

/// A numerical routine failed to converge or hit a degenerate configuration.
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// Zero-norm vector or an empty subspace where a direction is required.
class DegenerateError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

}  // namespace mgm
