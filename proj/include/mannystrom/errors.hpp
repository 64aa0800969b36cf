#pragma once

#include <stdexcept>
#include <string>

namespace mannystrom {

/// Base class for all library errors.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// A caller passed arguments outside an operation's contract
/// (dimension mismatch, non-symmetric input, l > d, bad ranges).
struct InvalidInput : Error {
  using Error::Error;
};

/// A matrix function was evaluated outside its scalar domain
/// (log/sqrt family on a nonpositive eigenvalue).
struct DomainError : Error {
  using Error::Error;
};

/// Numerically rank-deficient input where full rank is required
/// (polar factor of a deficient matrix, degenerate variance).
struct DegenerateInput : Error {
  using Error::Error;
};

/// Linear dependence detected while orthonormalizing.
struct RankDeficiency : Error {
  using Error::Error;
};

/// A stated precondition of a collaborating component was observed
/// to be violated at runtime (e.g. a non-self-adjoint operator).
struct ContractViolation : Error {
  using Error::Error;
};

/// Retraction or transport could not produce a valid point/vector.
struct StepFailure : Error {
  using Error::Error;
};

/// Malformed text input; message carries line/position context.
struct ParseError : Error {
  using Error::Error;
};

/// Invalid or inconsistent run configuration.
struct ConfigError : Error {
  using Error::Error;
};

}  // namespace mannystrom
