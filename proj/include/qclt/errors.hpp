#pragma once

#include <stdexcept>
#include <string>

namespace qclt {

// Base class for every failure this library raises on purpose, so callers
// can catch the whole family with one handler and map it to a process
// exit code.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// A transition-table row has a negative entry or does not sum to one
// within tolerance.
struct NonStochasticRow : Error {
  using Error::Error;
};

// The chain is reducible or periodic, so a unique positive stationary
// law with convergence from every start state does not exist.
struct NotErgodic : Error {
  using Error::Error;
};

// A weighted graph passed to the random-walk builder is not connected.
struct Disconnected : Error {
  using Error::Error;
};

// A target distribution handed to the Metropolis builder puts zero mass
// on some state.
struct ZeroTargetWeight : Error {
  using Error::Error;
};

// An iterative computation hit its iteration cap before reaching the
// requested residual.
struct NoConvergence : Error {
  using Error::Error;
};

// A truncated series could not certify a geometrically decaying tail
// before the term cap.
struct NoGeometricCertificate : Error {
  using Error::Error;
};

// A dense linear solve failed or its residual check did not pass.
struct SolveFailed : Error {
  using Error::Error;
};

// A long-run variance evaluated below the negative round-off band.
struct NegativeVariance : Error {
  using Error::Error;
};

// An exhaustive enumeration was requested for an instance too large to
// enumerate.
struct TooLargeForExact : Error {
  using Error::Error;
};

// The rotation construction cannot place the requested arcs disjointly
// inside the unit circle.
struct ArcsDontFit : Error {
  using Error::Error;
};

// A run configuration failed validation (missing seed, empty grids,
// out-of-range values, unparseable file).
struct ConfigError : Error {
  using Error::Error;
};

// Reading or writing an input/output file failed.
struct IoError : Error {
  using Error::Error;
};

}  // namespace qclt
