#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace junctionq {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Input outside its admissible domain (shares, variation coefficients, limits).
class ValidationError : public Error {
  public:
    using Error::Error;
};

/// A headway pair was requested whose sequence weight is zero.
class UndefinedPairError : public Error {
  public:
    using Error::Error;
};

/// A route has no conflicting demand, so its service time is undefined.
class NoDemandError : public Error {
  public:
    using Error::Error;
};

/// Hypoexponential fitting failed (unsupported cv or numerically invalid split).
class FittingError : public Error {
  public:
    using Error::Error;
};

/// The state space is larger than the configured cap.
class ResourceError : public Error {
  public:
    ResourceError(const std::string &what, std::size_t required)
        : Error(what), required_(required) {}

    std::size_t required() const noexcept { return required_; }

  private:
    std::size_t required_;
};

/// Iterative method stopped before reaching its tolerance.
class ConvergenceError : public Error {
  public:
    ConvergenceError(const std::string &what, double last_residual)
        : Error(what), last_residual_(last_residual) {}

    double last_residual() const noexcept { return last_residual_; }

  private:
    double last_residual_;
};

/// The chain is not irreducible (absorbing or unreachable states).
class StructuralError : public Error {
  public:
    using Error::Error;
};

/// Root finder was handed an interval without a sign change.
class BracketError : public Error {
  public:
    BracketError(const std::string &what, double fa, double fb)
        : Error(what), fa_(fa), fb_(fb) {}

    double fa() const noexcept { return fa_; }
    double fb() const noexcept { return fb_; }

  private:
    double fa_;
    double fb_;
};

} // namespace junctionq
