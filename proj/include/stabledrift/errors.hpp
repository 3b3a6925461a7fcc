#pragma once

#include <stdexcept>
#include <string>

namespace sdrift {

// Exit codes shared by the library errors and the command-line tool.
enum ExitCode : int {
    kExitOk = 0,
    kExitValidationFailure = 1,
    kExitConfigError = 2,
    kExitNumericalFailure = 3,
};

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
    virtual int exit_code() const { return kExitNumericalFailure; }
};

// Argument outside the mathematical domain of an operation (t <= 0, x = y, ...).
class DomainError : public Error {
public:
    using Error::Error;
    int exit_code() const override { return kExitConfigError; }
};

class ConfigError : public Error {
public:
    using Error::Error;
    int exit_code() const override { return kExitConfigError; }
};

// Quadrature did not reach the requested accuracy.
class AccuracyError : public Error {
public:
    using Error::Error;
};

// Series or iteration failed to contract (no T0, no lambda0, ...).
class ConvergenceError : public Error {
public:
    using Error::Error;
};

// A computed quantity violated a bound that holds in exact arithmetic.
class BoundViolation : public Error {
public:
    using Error::Error;
};

// Not enough Monte Carlo samples for the requested statistical test.
class InsufficientSample : public Error {
public:
    using Error::Error;
};

}  // namespace sdrift
