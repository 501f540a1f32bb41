#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <string>

namespace nmar {

// Base of everything thrown by this library on anticipated failure paths.
// The three direct children map onto CLI exit codes: bad configuration (2),
// bad input data (3), numerical failure during fitting (4).
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ConfigError : Error {
  using Error::Error;
};

struct DataError : Error {
  using Error::Error;
};

struct NumericalError : Error {
  using Error::Error;
};

// A kernel-weighted average had no mass at the query point (compact-support
// kernel with an isolated query, or total underflow of all weights).
struct EmptyNeighborhood : NumericalError {
  using NumericalError::NumericalError;
};

// A conditional-moment ratio lost its denominator (non-positive posterior
// mass, non-positive d*, or a collapsed second moment).
struct DegenerateConditional : NumericalError {
  using NumericalError::NumericalError;
};

// A provider was queried before being fitted to data.
struct NotFitted : NumericalError {
  using NumericalError::NumericalError;
};

// The sandwich bread matrix (or a Newton Jacobian) was numerically singular.
struct SingularJacobian : NumericalError {
  using NumericalError::NumericalError;
};

// Root search exhausted its iteration budget; carries the last iterate so
// callers can report where the search stalled.
struct NoConvergence : NumericalError {
  NoConvergence(const std::string& msg, Eigen::VectorXd last, int iters)
      : NumericalError(msg), last_iterate(std::move(last)), iterations(iters) {}
  Eigen::VectorXd last_iterate;
  int iterations = 0;
};

// More than the tolerated share of bootstrap resamples failed to produce an
// estimate.
struct BootstrapUnstable : NumericalError {
  BootstrapUnstable(const std::string& msg, int failed, int total)
      : NumericalError(msg), n_failed(failed), n_total(total) {}
  int n_failed = 0;
  int n_total = 0;
};

// The oracle estimator needs latent outcomes that only the simulator keeps;
// real data never has them.
struct OracleUnavailable : DataError {
  using DataError::DataError;
};

}  // namespace nmar
