#pragma once

#include <stdexcept>
#include <string>

namespace ccl {

/// Base class for all library errors.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Bad inputs: malformed files, schema mismatches, out-of-range arguments.
/// Maps to CLI exit code 1.
class ValidationError : public Error {
public:
    using Error::Error;
};

/// Non-finite values encountered during numeric work (training divergence,
/// NaN gradients). Maps to CLI exit code 2.
class NumericError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

class ParseError : public ValidationError {
public:
    ParseError(const std::string& msg, std::size_t line)
        : ValidationError(msg + " (line " + std::to_string(line) + ")"), line_(line) {}
    std::size_t line() const { return line_; }

private:
    std::size_t line_;
};

class SchemaError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

class TieError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

/// Parameter search could not reach its target; the message reports the
/// closest achieved value.
class CalibrationError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

}  // namespace ccl
