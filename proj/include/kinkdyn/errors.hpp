#pragma once

#include <stdexcept>
#include <string>

namespace kinkdyn {

/// Bad argument or precondition violation that the caller can fix.
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Interface positions left the admissible set (ordering or minimal gap).
class DomainViolation : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// The mass constraint has no admissible root.
class ConstraintInfeasible : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Newton extraction of Fermi coordinates did not converge.
class FermiFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The state left the stability tube (e.g. the Gram matrix became singular).
class TubeExit : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// ⟨f_{N+1}, u⟩ vanished in the subspace gap construction.
class DegenerateFrame : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// NaN/Inf or a failed factorization.
class NumericalFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed or rejected experiment configuration.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace kinkdyn
