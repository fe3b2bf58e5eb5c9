#pragma once

#include <stdexcept>
#include <string>

namespace ldspin {

// Failure classes map onto the CLI exit-code contract:
//   ConfigError -> 1, CapError/DomainError -> 2, InvariantError -> 3.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Malformed configuration input. line/column are 1-based; 0 = unknown.
struct ConfigError : Error {
  explicit ConfigError(const std::string& msg, int line = 0, int column = 0)
      : Error(line > 0 ? msg + " (line " + std::to_string(line) + ", column " +
                             std::to_string(column) + ")"
                       : msg),
        line(line),
        column(column) {}
  int line = 0;
  int column = 0;
};

// Resource cap exceeded or request infeasible (dimension caps, term caps,
// beta outside a certificate, empty feasible set).
struct CapError : Error {
  using Error::Error;
};

// Precondition violated by the caller (singular input, value outside the
// spectral interval, non-Hermitian operator, ...).
struct DomainError : Error {
  using Error::Error;
};

// An internal invariant failed mid-run (convexity violation, bracket
// inversion in a monotone solve). Indicates a bug or an unsupported regime.
struct InvariantError : Error {
  using Error::Error;
};

}  // namespace ldspin
