#pragma once

#include <stdexcept>
#include <string>

namespace prefgp {

// Bad data fed to an operation (dimension mismatch, empty input, ...).
struct InvalidInputError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// A configuration value violates its contract (non-positive length-scale, ...).
struct InvalidConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Linear algebra failed beyond recovery (Cholesky after jitter escalation,
// non-positive posterior variance, ...).
struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Internal consistency violation; indicates a bug in the caller.
struct InternalError : std::logic_error {
  using std::logic_error::logic_error;
};

// File ingestion problems; message names the offending file/id/line.
struct LoadError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace prefgp
