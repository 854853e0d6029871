#pragma once

#include <stdexcept>
#include <string>

namespace ragredteam {

/// Base class for all errors raised by this library.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

/// File system / serialization failures.
class IoError : public Error {
public:
    using Error::Error;
};

/// Malformed input: bad records, invalid JSON, missing keys.
class ParseError : public Error {
public:
    using Error::Error;
};

/// Violated preconditions or domain invariants.
class ValidationError : public Error {
public:
    using Error::Error;
};

/// Network-level failures and terminal HTTP responses.
class TransportError : public Error {
public:
    using Error::Error;
};

/// Scripted client ran out of replies or saw an unmatched prompt.
class ScriptError : public Error {
public:
    using Error::Error;
};

/// Bad configuration: unknown keys, missing credentials, invalid flags.
class ConfigError : public Error {
public:
    using Error::Error;
};

} // namespace ragredteam
