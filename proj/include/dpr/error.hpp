#pragma once

#include <stdexcept>
#include <string>

namespace dpr {

// Base for everything this library throws. The CLI maps subclasses to
// exit codes; library code throws and never calls exit().
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// A precondition of an operation was violated (wrong shapes, bad batch, ...).
class ContractError : public Error {
 public:
  using Error::Error;
};

// Shape disagreement between array operands.
class DimensionError : public ContractError {
 public:
  using ContractError::ContractError;
};

// An id (token, row, passage) was outside its valid range.
class IndexError : public Error {
 public:
  using Error::Error;
};

// Non-finite values where finite ones are required.
class NumericError : public Error {
 public:
  using Error::Error;
};

// Malformed or inconsistent input data (files, corpora, qrels, ...).
class DataError : public Error {
 public:
  using Error::Error;
};

// Remote completion endpoint failed after exhausting its retry budget.
class EndpointError : public Error {
 public:
  EndpointError(const std::string& msg, int status) : Error(msg), status_(status) {}
  int status() const { return status_; }

 private:
  int status_;
};

// Response or completion text could not be parsed.
class ParseError : public Error {
 public:
  using Error::Error;
};

// A completion yielded zero queries after filtering.
class EmptyExpansionError : public ParseError {
 public:
  using ParseError::ParseError;
};

}  // namespace dpr
