#pragma once

#include <stdexcept>
#include <string>

namespace stirkit {

/// Root of every exception thrown by the library.
class Error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Shapes of operands do not line up.
class DimensionError : public Error {
  public:
    using Error::Error;
};

/// Argument outside an operation's documented domain.
class InvalidArgument : public Error {
  public:
    using Error::Error;
};

/// Non-finite loss, failed convergence, degenerate statistic.
class NumericalError : public Error {
  public:
    using Error::Error;
};

/// Malformed or truncated file contents (IDX, CSV, checkpoint).
class FormatError : public Error {
  public:
    using Error::Error;
};

}  // namespace stirkit
