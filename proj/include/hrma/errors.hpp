#pragma once

#include <stdexcept>
#include <string>

namespace hrma {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Violated precondition or malformed input (bad grid, point outside domain, schema error).
class DomainError : public Error {
  public:
    using Error::Error;
};

/// An iterative method failed to converge; carries the final residual.
class NumericalError : public Error {
  public:
    NumericalError(const std::string& what, double residual)
        : Error(what + " (residual " + std::to_string(residual) + ")"), residual_(residual) {}
    double residual() const noexcept { return residual_; }

  private:
    double residual_;
};

}  // namespace hrma
