#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace gemb {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A model, scheme or config violates one of its invariants.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// An argument lies outside the domain of the operation (e.g. a latent outside [0,1]).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// A limiting kernel entry is undefined because the tilde weights vanish.
class SingularityError : public Error {
 public:
  using Error::Error;
};

/// Non-finite value encountered during training.
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// An iterative solver hit its iteration cap.
class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& what, std::vector<double> last_iterate, double kkt_residual)
      : Error(what), last_iterate_(std::move(last_iterate)), kkt_residual_(kkt_residual) {}

  /// Row-major last iterate.
  const std::vector<double>& last_iterate() const noexcept { return last_iterate_; }
  double kkt_residual() const noexcept { return kkt_residual_; }

 private:
  std::vector<double> last_iterate_;
  double kkt_residual_;
};

}  // namespace gemb
