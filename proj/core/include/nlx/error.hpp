#pragma once

#include <stdexcept>
#include <string>

namespace nlx {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A precondition of an operation was violated by the caller.
class ContractError : public Error {
public:
    using Error::Error;
};

/// An iteration failed to converge or produced a non-finite value.
class NumericError : public Error {
public:
    using Error::Error;
};

/// A configured resource budget (tree size, iteration cap) would be exceeded.
class ResourceError : public Error {
public:
    using Error::Error;
};

/// A configuration file or option could not be interpreted.
class ConfigError : public Error {
public:
    using Error::Error;
};

}  // namespace nlx
