#pragma once

#include <stdexcept>
#include <string>

namespace kiparc {

/// Base class for all library errors.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// A value violates a domain-type invariant or a documented precondition.
class DomainError : public Error {
public:
    using Error::Error;
};

/// Base for runtime numerical failures (poles, bracketing, convergence).
class NumericError : public Error {
public:
    using Error::Error;
};

/// Evaluation requested at or beyond a pole of the linearized response
/// (device at/above the parametric-oscillation threshold).
class PoleError : public NumericError {
public:
    using NumericError::NumericError;
};

/// Root bracketing failed: no root, or more than one root, in the band.
class RootSearchError : public NumericError {
public:
    using NumericError::NumericError;
};

/// A frequency passed to the profile builder does not satisfy the
/// boundary conditions; it is not a resonance of the given geometry.
class InconsistentModeError : public NumericError {
public:
    using NumericError::NumericError;
};

/// Optimizer exhausted its iteration budget without meeting any
/// convergence test.
class ConvergenceError : public NumericError {
public:
    using NumericError::NumericError;
};

/// The data cannot constrain the requested parameters (near-singular
/// normal equations).
class IllConditionedError : public NumericError {
public:
    using NumericError::NumericError;
};

/// Input carries no usable signal for the requested operation
/// (zero-amplitude channel, fringe-free data, zero mixing rate).
class DegenerateInputError : public NumericError {
public:
    using NumericError::NumericError;
};

/// Configuration document invalid; message carries the offending key path.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Filesystem failure (missing input, refused overwrite, write error).
class IoError : public Error {
public:
    using Error::Error;
};

} // namespace kiparc
