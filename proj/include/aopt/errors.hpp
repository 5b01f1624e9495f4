#pragma once

#include <stdexcept>
#include <string>

namespace aopt {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Linear predictor outside the admissible domain of the link/family.
class DomainError : public Error {
public:
  using Error::Error;
};

/// Custom family or link used without the required hook.
class MissingHook : public Error {
public:
  using Error::Error;
};

/// Model matrix (or sample model matrix) lacks full column rank.
class RankError : public Error {
public:
  using Error::Error;
};

/// Information matrix is singular where a nonsingular one is required.
class SingularError : public Error {
public:
  using Error::Error;
};

/// A weight at or above 1 was handed to a lift-one computation.
class WeightError : public Error {
public:
  using Error::Error;
};

/// Direction with A = B = 0; carries no information.
class DegenerateError : public Error {
public:
  using Error::Error;
};

/// No feasible (nonsingular) design exists or can be constructed.
class InfeasibleError : public Error {
public:
  using Error::Error;
};

/// Iteration cap reached before the stopping rule fired.
class NonConvergence : public Error {
public:
  using Error::Error;
};

/// Basis contains terms without a derivative in a continuous factor.
class NonDifferentiableError : public Error {
public:
  using Error::Error;
};

/// Logistic likelihood without a finite maximizer.
class SeparationError : public Error {
public:
  using Error::Error;
};

/// Stratified allocation asks for more units than a stratum holds.
class AllocationError : public Error {
public:
  using Error::Error;
};

/// Malformed input (bad dimensions, invalid invariants).
class InvalidArgument : public Error {
public:
  using Error::Error;
};

}  // namespace aopt
