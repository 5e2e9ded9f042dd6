#pragma once

#include <stdexcept>
#include <string>

namespace gas_oracle {

/// Base of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A caller violated a documented precondition (empty input, alpha out of range, ...).
class PreconditionError : public Error {
 public:
  using Error::Error;
};

/// Malformed input file. `line` is 1-based, 0 when unknown.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : Error(line ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

/// Block numbers not strictly increasing, or duplicate (block, tx) rows.
class OrderingError : public ParseError {
 public:
  using ParseError::ParseError;
};

/// Input has the wrong columns/fields.
class SchemaError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

/// JSON-RPC failure after retries.
class FetchError : public Error {
 public:
  FetchError(const std::string& what, unsigned long long block) : Error(what), block_(block) {}
  unsigned long long block() const { return block_; }

 private:
  unsigned long long block_;
};

/// Factorization failed even with the largest jitter.
class NumericalError : public Error {
 public:
  NumericalError(const std::string& what, double condition_estimate)
      : Error(what), condition_estimate_(condition_estimate) {}
  double condition_estimate() const { return condition_estimate_; }

 private:
  double condition_estimate_;
};

/// Every optimizer start failed.
class FitError : public Error {
 public:
  using Error::Error;
};

/// Not enough past blocks to fill a training window.
class InsufficientHistory : public PreconditionError {
 public:
  using PreconditionError::PreconditionError;
};

/// Oracle state is inconsistent with the requested operation.
class StateError : public Error {
 public:
  using Error::Error;
};

}  // namespace gas_oracle
