#pragma once

#include <stdexcept>
#include <string>

namespace cvtp {

/// Base class of every error thrown by this library.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Malformed file contents; the message names the offending byte or line.
struct FormatError : Error {
  using Error::Error;
};

/// Declared and actual payload sizes disagree.
struct DimensionError : Error {
  using Error::Error;
};

/// A value violates a domain invariant (non-finite, out of range, ...).
struct ValidationError : Error {
  using Error::Error;
};

/// Instance exceeds a documented size cap.
struct CapacityError : Error {
  using Error::Error;
};

/// A numerical procedure failed beyond recovery.
struct NumericalError : Error {
  using Error::Error;
};

/// Input data is degenerate for the requested statistic
/// (zero-variance series, constant field, unfittable curve).
struct DegenerateError : Error {
  using Error::Error;
};

/// Inconsistent or unsatisfiable configuration.
struct ConfigError : Error {
  using Error::Error;
};

/// Filesystem failure.
struct IoError : Error {
  using Error::Error;
};

}  // namespace cvtp
