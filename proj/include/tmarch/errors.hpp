#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace tmarch {

// Base of everything the library throws on purpose.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid parameters or arguments outside a function's domain.
class DomainError : public Error {
 public:
  using Error::Error;
};

class InsufficientDataError : public Error {
 public:
  using Error::Error;
};

// A simulated value became non-finite.
class DivergenceError : public Error {
 public:
  DivergenceError(std::size_t index, const std::string& what)
      : Error("divergence at step " + std::to_string(index) + ": " + what), index_(index) {}
  std::size_t index() const noexcept { return index_; }

 private:
  std::size_t index_;
};

class DegenerateWeightsError : public Error {
 public:
  using Error::Error;
};

class FitFailure : public Error {
 public:
  using Error::Error;
};

// Malformed input files, schemas, configs.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Well-formed file with bad content (duplicate dates, non-positive prices).
class DataError : public Error {
 public:
  using Error::Error;
};

}  // namespace tmarch
