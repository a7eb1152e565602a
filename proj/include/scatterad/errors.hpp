#pragma once

#include <stdexcept>
#include <string>

namespace scatterad {

// Base class for all library errors.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Bad configuration: unknown key, out-of-range value, inconsistent options.
struct ConfigError : Error {
    using Error::Error;
};

// Bad input data: unreadable files, malformed CSV, mismatched streams.
struct DataError : Error {
    using Error::Error;
};

// Numerical failure: shape mismatch, domain violation, non-finite loss.
struct NumericError : Error {
    using Error::Error;
};

}  // namespace scatterad
