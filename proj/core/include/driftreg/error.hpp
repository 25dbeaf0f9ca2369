#pragma once

#include <stdexcept>
#include <string>

namespace driftreg {

// Every error thrown by the library derives from Error. The message is
// prefixed with the owning module ("volume: ...", "warp: ...") so callers
// can surface it unchanged.
class Error : public std::runtime_error {
public:
    Error(const std::string& module, const std::string& what)
        : std::runtime_error(module + ": " + what), module_(module) {}

    const std::string& module() const noexcept { return module_; }

private:
    std::string module_;
};

// Bad argument, shape mismatch, or violated invariant.
class ValidationError : public Error {
public:
    using Error::Error;
};

// File could not be read or written, or its contents are malformed.
class IoError : public Error {
public:
    using Error::Error;
};

// A computation produced a non-finite value or cannot be evaluated.
class NumericalError : public Error {
public:
    using Error::Error;
};

// Configuration document rejected.
class ConfigError : public Error {
public:
    using Error::Error;
};

}  // namespace driftreg
