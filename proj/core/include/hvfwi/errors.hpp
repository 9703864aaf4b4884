#pragma once

#include <stdexcept>
#include <string>

namespace hvfwi {

/// Base class for all toolkit failures.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Characteristic positions ceased to be strictly increasing in space;
/// the grid is too coarse for the current velocity field.
struct MonotonicityLoss : Error {
  using Error::Error;
};

/// The time integral of the flow Jacobian underflowed to zero.
struct DegenerateFlow : Error {
  using Error::Error;
};

/// Banded factorization hit a zero pivot.
struct SingularSystem : Error {
  using Error::Error;
};

/// A signal normalized for transport has nonpositive total mass.
struct ZeroMass : Error {
  using Error::Error;
};

/// Sparse assembly or factorization of the Helmholtz operator failed.
struct FactorizationFailure : Error {
  using Error::Error;
};

/// Receiver counts of compared gathers differ.
struct MismatchedGeometry : Error {
  using Error::Error;
};

/// Reference model is constant; PSNR is undefined.
struct DegenerateReference : Error {
  using Error::Error;
};

/// Configuration or file-header validation failure (CLI exit code 2).
struct ConfigError : Error {
  using Error::Error;
};

/// Filesystem failure (CLI exit code 1).
struct IoError : Error {
  using Error::Error;
};

}  // namespace hvfwi
