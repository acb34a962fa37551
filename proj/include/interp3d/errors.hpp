#pragma once

#include <stdexcept>
#include <string>

namespace interp3d {

// Base class for all library errors.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Bad arguments to an operation (shape mismatch, out-of-range values, ...).
class InvalidInputError : public Error {
public:
    explicit InvalidInputError(const std::string& msg) : Error(msg) {}
};

// Invalid or inconsistent run configuration. Maps to CLI exit code 2.
class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& msg) : Error(msg) {}
};

// Filesystem / serialization failure. Maps to CLI exit code 4.
class IoError : public Error {
public:
    explicit IoError(const std::string& msg) : Error(msg) {}
};

}  // namespace interp3d
