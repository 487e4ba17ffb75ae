#pragma once

#include <stdexcept>
#include <string>

namespace entlab {

/// Base class for all entlab failures.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Experiment configuration does not match the schema.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// An integrand or density evaluated to a non-finite or otherwise
/// inadmissible value; the message identifies the point.
class EvaluationError : public Error {
 public:
  using Error::Error;
};

/// A density evaluated to a negative value.
class NegativeDensityError : public EvaluationError {
 public:
  using EvaluationError::EvaluationError;
};

/// A candidate density does not integrate to 1 within tolerance.
class NormalizationError : public Error {
 public:
  using Error::Error;
};

/// Quadrature partial sums exceeded the configured magnitude; the
/// integral behaves as divergent at the working resolution.
class DivergenceError : public Error {
 public:
  using Error::Error;
};

/// A density is positive on a set where the dominating density vanishes.
class AbsoluteContinuityError : public Error {
 public:
  using Error::Error;
};

/// Composition table is not a group, or a subset is not a (normal) subgroup.
class GroupError : public Error {
 public:
  using Error::Error;
};

/// Conditional measure requested on a fiber carrying zero pushforward mass.
class ZeroMassFiberError : public Error {
 public:
  using Error::Error;
};

/// Exact-computation limits exceeded (alphabet, block length, evaluations).
class BudgetError : public Error {
 public:
  using Error::Error;
};

/// Rejection sampler efficiency collapsed below the abort threshold.
class RejectionError : public Error {
 public:
  using Error::Error;
};

/// Singular or otherwise unsupported linear map.
class LinAlgError : public Error {
 public:
  using Error::Error;
};

}  // namespace entlab
