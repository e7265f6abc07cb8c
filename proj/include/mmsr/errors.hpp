#pragma once

#include <stdexcept>
#include <string>

namespace mmsr {

// Base for all pipeline errors. The CLI maps these to a single-line
// message on stderr and a nonzero exit code.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Bad argument values (frequencies out of range, dimension mismatch, ...).
struct ParameterError : Error {
    using Error::Error;
};

// Malformed or inconsistent input data (ragged channels, NaN samples, ...).
struct DataError : Error {
    using Error::Error;
};

// Tensor shape disagreements between layers or streams.
struct ShapeError : Error {
    using Error::Error;
};

// Operation invoked in the wrong state (backward without forward, ...).
struct StateError : Error {
    using Error::Error;
};

// Numerical failure (eigensolver did not converge, ...).
struct NumericError : Error {
    using Error::Error;
};

// Invalid experiment configuration.
struct ConfigError : Error {
    using Error::Error;
};

}  // namespace mmsr
