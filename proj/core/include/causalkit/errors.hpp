#pragma once

#include <stdexcept>
#include <string>

namespace causalkit {

// Raised when a requested computation is well-formed but the data cannot
// support it (empty arm, zero-probability evidence, exhausted draw budget...).
// Callers that want to distinguish failure modes catch the concrete type;
// the CLI maps any of these to exit code 1.
class DomainError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ZeroProbabilityEvidence : public DomainError {
 public:
  using DomainError::DomainError;
};

class BudgetExhausted : public DomainError {
 public:
  using DomainError::DomainError;
};

class PositivityError : public DomainError {
 public:
  using DomainError::DomainError;
};

class UnmatchedCell : public DomainError {
 public:
  using DomainError::DomainError;
};

class RankDeficient : public DomainError {
 public:
  using DomainError::DomainError;
};

class DegenerateData : public DomainError {
 public:
  using DomainError::DomainError;
};

class StateSpaceTooLarge : public DomainError {
 public:
  using DomainError::DomainError;
};

}  // namespace causalkit
