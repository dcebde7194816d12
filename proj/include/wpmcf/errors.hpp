#pragma once

#include <stdexcept>
#include <string>

namespace wpmcf {

/// Bad user input: malformed config, out-of-range parameter, unknown key.
struct ConfigError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// A radius or height outside the domain of a warping function.
struct DomainError : std::out_of_range {
  using std::out_of_range::out_of_range;
};

/// Numerical failure: bracket lost, degenerate metric, angle below floor.
struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Raised by a flow step when min Θ falls below the configured floor.
struct GraphicalityLost : NumericalError {
  using NumericalError::NumericalError;
};

/// Raised by a flow step when the height leaves the warp domain.
struct DomainExit : NumericalError {
  using NumericalError::NumericalError;
};

}  // namespace wpmcf
