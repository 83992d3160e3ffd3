#pragma once

#include <stdexcept>
#include <string>

namespace qsde {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Bad user input: unknown keys, unparseable files, invalid run parameters.
class ConfigError : public Error {
public:
    using Error::Error;
};

class DimensionError : public Error {
public:
    using Error::Error;
};

// Runtime numerical failures (non-finite values, ODE step failure, ...).
class NumericalError : public Error {
public:
    using Error::Error;
};

class SingularMatrixError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

// Pre-projection vector collapsed to zero; usually a symptom of a time step
// that is far too large for the problem.
class DegenerateStepError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

} // namespace qsde
