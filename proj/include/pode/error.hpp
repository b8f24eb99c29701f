#pragma once

#include <stdexcept>
#include <string>

namespace pode {

/// Base class for all errors raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed input: bad files, inconsistent dimensions, invalid parameters.
class InputError : public Error {
public:
    using Error::Error;
};

/// A numerical procedure failed (factorization, divergence, non-PSD input).
class NumericalError : public Error {
public:
    using Error::Error;
};

} // namespace pode
