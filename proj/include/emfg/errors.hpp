#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace emfg {

// Invalid user configuration (bad parameter, violated subcriticality, ...).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Fields whose size does not match the grid they are used with.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Input outside the domain of a function (e.g. a negative density).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// A feasible pair was required but the constraint or mass check failed.
class InfeasibleError : public std::runtime_error {
 public:
  InfeasibleError(const std::string& what, double mass_error, double constraint_residual)
      : std::runtime_error(what), mass_error_(mass_error), constraint_residual_(constraint_residual) {}
  double mass_error() const { return mass_error_; }
  double constraint_residual() const { return constraint_residual_; }

 private:
  double mass_error_;
  double constraint_residual_;
};

// An iterative solve failed; carries the residual history for diagnosis.
class SolverError : public std::runtime_error {
 public:
  SolverError(const std::string& what, std::vector<double> history = {})
      : std::runtime_error(what), history_(std::move(history)) {}
  const std::vector<double>& history() const { return history_; }

 private:
  std::vector<double> history_;
};

}  // namespace emfg
