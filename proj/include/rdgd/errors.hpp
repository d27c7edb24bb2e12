#pragma once

#include <stdexcept>
#include <string>

namespace rdgd {

// Base of every error thrown by the library. Callers that only care about
// "something in the simulator refused" can catch this one.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class DimensionError : public Error {
public:
    using Error::Error;
};

// A caller-side contract was not met (bad f/r budgets, empty inputs, ...).
class PreconditionError : public Error {
public:
    using Error::Error;
};

// Aggregate Hessian is not positive definite, so the minimizer is not unique.
class SingularAggregateError : public Error {
public:
    using Error::Error;
};

class EnumerationCapError : public Error {
public:
    using Error::Error;
};

// Target minimizer lies outside the feasible box.
class BoxViolationError : public Error {
public:
    using Error::Error;
};

// |T^t| dropped below n - r, or the delay model cannot deliver n - r gradients.
class StragglerBudgetError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

}  // namespace rdgd
