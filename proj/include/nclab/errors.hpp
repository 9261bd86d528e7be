#pragma once

#include <stdexcept>
#include <string>

namespace nclab {

/// Operand dimensions do not fit the operation.
struct ShapeError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// Inputs outside an operation's mathematical domain (zero norm, empty class, ...).
struct DomainError : std::domain_error {
  using std::domain_error::domain_error;
};

/// Non-finite values or a failed numeric guard.
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// File or stream failure; the message carries the path.
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace nclab
