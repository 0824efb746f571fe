#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace lcert {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A computation produced or consumed a non-finite value.
class NumericDomainError : public Error {
 public:
  using Error::Error;
};

/// An iterative scheme failed to converge within its cap.
class DivergenceError : public Error {
 public:
  using Error::Error;
};

/// A matrix expected to have full row rank does not.
class RankError : public Error {
 public:
  using Error::Error;
};

class DegenerateHullError : public Error {
 public:
  using Error::Error;
};

/// A caller violated an input bound (e.g. input box, disturbance norm).
class ContractError : public Error {
 public:
  using Error::Error;
};

/// Evaluation at a point where the quantity is undefined.
class SingularityError : public Error {
 public:
  using Error::Error;
};

/// The CBF-QP feasible set is empty. `margin()` is the (negative) amount by
/// which the best achievable constraint value falls short.
class InfeasibleError : public Error {
 public:
  InfeasibleError(const std::string& what, double margin)
      : Error(what), margin_(margin) {}
  double margin() const noexcept { return margin_; }

 private:
  double margin_;
};

class CollectionError : public Error {
 public:
  using Error::Error;
};

class SynthesisError : public Error {
 public:
  using Error::Error;
};

class DegenerateDomainError : public Error {
 public:
  using Error::Error;
};

/// Right-inverse residual of a decoder exceeds the admissible tolerance.
class RightInverseError : public Error {
 public:
  RightInverseError(const std::string& what, double residual)
      : Error(what), residual_(residual) {}
  double residual() const noexcept { return residual_; }

 private:
  double residual_;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Training produced a non-finite loss. Carries the last finite parameters.
class TrainingError : public Error {
 public:
  TrainingError(const std::string& what, std::vector<double> last_finite)
      : Error(what), last_finite_(std::move(last_finite)) {}
  const std::vector<double>& last_finite() const noexcept { return last_finite_; }

 private:
  std::vector<double> last_finite_;
};

}  // namespace lcert
