#pragma once

#include <stdexcept>
#include <string>

namespace deepcas {

// Caller broke a precondition (dimension mismatch, index out of range, ...).
class ContractViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// A subsystem or experiment description is malformed or violates an invariant.
class SpecificationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NumericalFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Non-finite values appeared while training the Q-network.
class TrainingFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class BudgetExceeded : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Configuration validation failure; `field()` is a JSON-pointer-like path.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string field, const std::string& what)
      : std::runtime_error(field + ": " + what), field_(std::move(field)) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

class IncompatibleCheckpoint : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline void require(bool cond, const char* what) {
  if (!cond) throw ContractViolation(what);
}

}  // namespace deepcas
