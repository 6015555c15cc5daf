#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace rwrp {

// Bad input: out-of-range parameters, malformed files, guard violations.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// The numbers could not be produced: non-convergence, underflow, zero hits.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConvergenceError : public NumericalError {
 public:
  ConvergenceError(const std::string& what, double last_residual, std::int64_t iterations)
      : NumericalError(what), last_residual_(last_residual), iterations_(iterations) {}
  double last_residual() const { return last_residual_; }
  std::int64_t iterations() const { return iterations_; }

 private:
  double last_residual_;
  std::int64_t iterations_;
};

// Enumeration would exceed the configured number of relevant sites.
class GuardError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

// A replicate task threw; carries what is needed to replay it.
class ReplicateError : public NumericalError {
 public:
  ReplicateError(const std::string& what, std::int64_t index, std::uint64_t seed)
      : NumericalError(what), index_(index), seed_(seed) {}
  std::int64_t index() const { return index_; }
  std::uint64_t stream_seed() const { return seed_; }

 private:
  std::int64_t index_;
  std::uint64_t seed_;
};

}  // namespace rwrp
