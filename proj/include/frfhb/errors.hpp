#pragma once

#include <stdexcept>
#include <string>

namespace frfhb {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid arguments or model/spec combinations.
class InvalidArgument : public Error {
public:
    using Error::Error;
};

/// A forward-model evaluation produced a non-finite value.
class EvaluationError : public Error {
public:
    using Error::Error;
};

/// Malformed or inconsistent input data (CSV rows, spectra, datasets).
class DataError : public Error {
public:
    using Error::Error;
};

/// Configuration file problems.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// The sampler could not produce a usable trace.
class SamplerError : public Error {
public:
    using Error::Error;
};

} // namespace frfhb
