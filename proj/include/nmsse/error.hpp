// error.hpp - Exception types shared by the simulator modules

#pragma once

#include <stdexcept>
#include <string>

namespace nmsse {

// Caller supplied something outside an operation's domain.
class InvalidArgument : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

class UnsupportedDimension : public InvalidArgument {
public:
    using InvalidArgument::InvalidArgument;
};

class UnsupportedOrder : public InvalidArgument {
public:
    using InvalidArgument::InvalidArgument;
};

// Raised when a kernel is used for the quadrature unravelling but does not
// admit the real cos/sin decomposition.
class KernelNotReal : public InvalidArgument {
public:
    using InvalidArgument::InvalidArgument;
};

class CapacityError : public std::length_error {
public:
    using std::length_error::length_error;
};

class DegenerateState : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Base for failures of the numerics themselves (exit code 3 in the CLI).
class NumericError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class TrajectoryFailure : public NumericError {
public:
    TrajectoryFailure(const std::string& what, double t) : NumericError(what), time_(t) {}
    double time() const noexcept { return time_; }

private:
    double time_;
};

class TruncationError : public NumericError {
public:
    TruncationError(const std::string& what, int suggested_nmax)
        : NumericError(what), suggested_nmax_(suggested_nmax) {}
    int suggested_nmax() const noexcept { return suggested_nmax_; }

private:
    int suggested_nmax_;
};

class EnsembleFailure : public NumericError {
public:
    using NumericError::NumericError;
};

class ConfigError : public std::runtime_error {
public:
    ConfigError(const std::string& what, int line = 0, std::string key = {})
        : std::runtime_error(what), line_(line), key_(std::move(key)) {}
    int line() const noexcept { return line_; }
    const std::string& key() const noexcept { return key_; }

private:
    int line_;
    std::string key_;
};

class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace nmsse
