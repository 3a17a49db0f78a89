#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace pclab {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Operand shapes are incompatible for the requested operation.
class ShapeError : public Error {
public:
    using Error::Error;
};

/// A parameter, configuration field, or input value is invalid.
class ValueError : public Error {
public:
    using Error::Error;
};

/// A configuration or input file is malformed; field() names the offending key.
class ConfigError : public ValueError {
public:
    ConfigError(const std::string& field, const std::string& what)
        : ValueError(field.empty() ? what : "field '" + field + "': " + what)
        , field_(field) {}

    const std::string& field() const noexcept { return field_; }

private:
    std::string field_;
};

/// A computation produced NaN or infinity.
class NonFiniteError : public ValueError {
public:
    using ValueError::ValueError;
};

/// The input is numerically degenerate for the requested measurement
/// (zero variance, coincident class means, ...).
class DegenerateError : public Error {
public:
    using Error::Error;
};

/// An iterative kernel hit its iteration cap.
class ConvergenceError : public Error {
public:
    ConvergenceError(const std::string& what, std::size_t iterations)
        : Error(what + " (after " + std::to_string(iterations) + " iterations)")
        , iterations_(iterations) {}

    std::size_t iterations() const noexcept { return iterations_; }

private:
    std::size_t iterations_;
};

/// Training produced a non-finite or exploding loss.
class DivergenceError : public Error {
public:
    DivergenceError(const std::string& what, std::size_t step)
        : Error(what + " at step " + std::to_string(step))
        , step_(step) {}

    std::size_t step() const noexcept { return step_; }

private:
    std::size_t step_;
};

}  // namespace pclab
