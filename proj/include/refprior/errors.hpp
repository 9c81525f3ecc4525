#pragma once

#include <stdexcept>
#include <string>

namespace refprior {

// Root of the library's exception hierarchy.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Argument outside the mathematical domain (theta outside Theta, z <= 0, ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

// Evaluation outside a tabulated or supported range; no extrapolation.
class RangeError : public Error {
 public:
  using Error::Error;
};

// The model does not provide the requested capability.
class UnsupportedOperation : public Error {
 public:
  using Error::Error;
};

// Likelihood is not regular enough for Fisher information.
class NonregularityError : public Error {
 public:
  using Error::Error;
};

// The formal posterior normalizer diverges.
class ImproprietyError : public Error {
 public:
  using Error::Error;
};

// An internal invariant was broken; indicates a bug, not bad input.
class InvariantViolation : public Error {
 public:
  using Error::Error;
};

// Adaptive quadrature ran out of refinements before meeting tolerance.
class ToleranceFailure : public Error {
 public:
  ToleranceFailure(const std::string& what, double best_log_estimate, double log_gap)
      : Error(what), best_log_estimate_(best_log_estimate), log_gap_(log_gap) {}

  // Best available estimate (log scale for log_integrate, linear otherwise).
  double best_estimate() const noexcept { return best_log_estimate_; }
  // Remaining error estimate on the same scale as best_estimate().
  double gap() const noexcept { return log_gap_; }

 private:
  double best_log_estimate_;
  double log_gap_;
};

}  // namespace refprior
