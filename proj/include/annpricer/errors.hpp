#pragma once

#include <stdexcept>
#include <string>

namespace annp {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Argument outside the mathematical domain of an operation.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// A target price with no volatility that reproduces it.
class NoSolutionError : public Error {
 public:
  using Error::Error;
};

/// Invalid configuration (sampling ranges, hyperparameters, run keys).
class ConfigError : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Model file could not be read back into a complete network.
class LoadError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

/// Training produced a non-finite loss.
class DivergenceError : public Error {
 public:
  DivergenceError(const std::string& what, int epoch, long batch, double grad_norm)
      : Error(what), epoch_(epoch), batch_(batch), grad_norm_(grad_norm) {}
  int epoch() const noexcept { return epoch_; }
  long batch() const noexcept { return batch_; }
  double grad_norm() const noexcept { return grad_norm_; }

 private:
  int epoch_;
  long batch_;
  double grad_norm_;
};

/// Aggregation impossible: no quotes or no informative weight.
class CalibrationError : public Error {
 public:
  using Error::Error;
};

}  // namespace annp
