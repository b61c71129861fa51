#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace covprior {

// Root of every error thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Argument outside the mathematical domain of an operation.
class DomainError : public Error {
public:
    using Error::Error;
};

// Quadrature or Monte-Carlo run stopped before meeting its tolerance.
// Carries the best estimate so callers can still inspect it.
class IntegrationError : public Error {
public:
    IntegrationError(const std::string& what, double best_estimate, double error_estimate,
                     std::size_t evals)
        : Error(what), best_(best_estimate), err_(error_estimate), evals_(evals) {}

    double best_estimate() const noexcept { return best_; }
    double error_estimate() const noexcept { return err_; }
    std::size_t evals_used() const noexcept { return evals_; }

private:
    double best_;
    double err_;
    std::size_t evals_;
};

class DegenerateMetricError : public Error {
public:
    using Error::Error;
};

// Posterior or evidence with no support: the evidence is zero.
class EmptySupportError : public Error {
public:
    using Error::Error;
    double evidence() const noexcept { return 0.0; }
};

class DivergenceError : public Error {
public:
    using Error::Error;
};

// An up-to-constant (improper-prior) evidence was offered for model comparison.
class IncomparableEvidenceError : public Error {
public:
    using Error::Error;
};

class ShapeError : public Error {
public:
    using Error::Error;
};

class MomentUndefinedError : public Error {
public:
    using Error::Error;
};

class InfeasibleModelError : public Error {
public:
    using Error::Error;
};

class ParseError : public Error {
public:
    ParseError(const std::string& what, std::size_t line)
        : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

}  // namespace covprior
