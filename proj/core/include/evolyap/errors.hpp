#pragma once

#include <stdexcept>
#include <string>

namespace evolyap {

// Base class for all evolyap errors.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// monotone_inverse: target value above the range of a bounded class-K function.
class OutOfRangeError : public Error {
 public:
  using Error::Error;
};

// A numerical evaluation overflowed or produced NaN where a finite value is required.
class NonFiniteError : public Error {
 public:
  using Error::Error;
};

// No exponential majorant with positive decay rate fits the trajectory data.
class NotUniformlyStableError : public Error {
 public:
  using Error::Error;
};

// A construction that needs uniform exponential stability was invoked without it.
class NotExponentiallyStableError : public Error {
 public:
  using Error::Error;
};

// Operator Lyapunov construction requires a bounded generator family.
class UnboundedGeneratorError : public Error {
 public:
  using Error::Error;
};

// Dissipation check called with eta outside (0, 2w/k^2).
class BadEtaError : public Error {
 public:
  using Error::Error;
};

// Logarithmic certificate requested without a validated lower norm envelope.
class MissingLowerEnvelopeError : public Error {
 public:
  using Error::Error;
};

// A trajectory left the blow-up ball during an operation that needs it to exist.
class EscapedError : public Error {
 public:
  using Error::Error;
};

// Fixed-step integration persistently exceeds the local increment cap.
class StepTooLargeError : public Error {
 public:
  using Error::Error;
};

// Spatial discretization below the supported resolution.
class GridTooCoarseError : public Error {
 public:
  using Error::Error;
};

// Requested certificate does not apply to the given system (e.g. wrong sign
// of the decay constant).
class NotApplicableError : public Error {
 public:
  using Error::Error;
};

// Stability classification cannot decide: the fitted majorant has nonnegative
// slope but the norm table is still decreasing at the end of the horizon.
class InconclusiveHorizonError : public Error {
 public:
  using Error::Error;
};

// Invalid or inconsistent experiment configuration; message names the key.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace evolyap
