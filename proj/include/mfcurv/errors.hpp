#pragma once

#include <stdexcept>
#include <string>

namespace mfcurv {

/// Base class for all library errors.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Malformed model specification or inconsistent input shapes.
struct SpecError : Error {
  using Error::Error;
};

/// Argument outside the mathematical domain of a function.
struct DomainError : Error {
  using Error::Error;
};

/// A numerical procedure failed (singular system, no convergence, ...).
struct NumericalError : Error {
  using Error::Error;
};

}  // namespace mfcurv
