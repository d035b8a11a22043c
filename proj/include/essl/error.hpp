#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace essl {

// Base of every error the library throws. Subclasses let callers (the CLI in
// particular) map failures onto exit codes without string matching.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Input could not be read or did not satisfy a documented invariant.
class ValidationError : public Error {
 public:
  using Error::Error;
};

class ParseError : public ValidationError {
 public:
  ParseError(std::size_t line, const std::string& what)
      : ValidationError("line " + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class LookupError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

// The game itself is degenerate: a zero denominator, or an interior point the
// analysis does not cover.
class DomainError : public Error {
 public:
  using Error::Error;
};

class DegenerateGameError : public DomainError {
 public:
  using DomainError::DomainError;
};

class OutOfSimplexError : public DomainError {
 public:
  OutOfSimplexError(double x, double y);

  double x() const noexcept { return x_; }
  double y() const noexcept { return y_; }

 private:
  double x_;
  double y_;
};

// A precondition that callers are expected to guarantee was broken.
class ContractViolation : public Error {
 public:
  using Error::Error;
};

// Feature batches that cannot be normalized (zero-norm rows, constant columns).
class DegenerateFeatureError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

}  // namespace essl
