#pragma once

#include <stdexcept>
#include <string>

namespace exq {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Bad caller input (dimension mismatch, out-of-range parameter, bad config).
struct InputError : Error {
  using Error::Error;
};

// Importance sampling could not retain a single point.
struct DegenerateSupportError : Error {
  using Error::Error;
};

// Maximum-likelihood fit failed to converge or data was degenerate.
struct FitError : Error {
  using Error::Error;
};

// Kernel matrix stayed ill-conditioned after jitter escalation.
struct ConditioningError : Error {
  using Error::Error;
};

// Quantile inversion could not bracket or converge.
struct InversionError : Error {
  using Error::Error;
};

// Space-filling design could not be placed inside the practical support.
struct DesignError : Error {
  using Error::Error;
};

// External (or builtin) simulator misbehaved.
struct SimulatorError : Error {
  using Error::Error;
};

}  // namespace exq
