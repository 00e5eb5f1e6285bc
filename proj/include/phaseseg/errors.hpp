#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace phaseseg {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A constructor or factory argument is outside its admissible range.
class InvalidParameter : public Error {
public:
    using Error::Error;
};

/// A function was evaluated outside its domain (negative m for K, rho outside D(beta), ...).
class DomainError : public Error {
public:
    using Error::Error;
};

/// Two fields or trajectories do not share a grid / time step.
class ShapeError : public Error {
public:
    using Error::Error;
};

/// Initial data or a configuration violates a model condition.
class ValidationError : public Error {
public:
    using Error::Error;
};

/// An iterative scalar or linear solver hit its iteration cap.
class SolverFailure : public Error {
public:
    SolverFailure(const std::string& what, double last_iterate, double residual)
        : Error(what), last_iterate_(last_iterate), residual_(residual) {}

    double last_iterate() const noexcept { return last_iterate_; }
    double residual() const noexcept { return residual_; }

private:
    double last_iterate_;
    double residual_;
};

/// Zero pivot in a direct solve.
class SingularityError : public Error {
public:
    using Error::Error;
};

/// The mu-update diagonal safeguard failed; the caller must reduce tau.
class StepSizeError : public Error {
public:
    StepSizeError(const std::string& what, std::size_t cell, double margin)
        : Error(what), cell_(cell), margin_(margin) {}

    std::size_t cell() const noexcept { return cell_; }
    double margin() const noexcept { return margin_; }

private:
    std::size_t cell_;
    double margin_;
};

/// Malformed configuration text.
class ConfigError : public Error {
public:
    using Error::Error;
};

}  // namespace phaseseg
