// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>
#include <utility>

#include <Eigen/Dense>

namespace gridcal {

/// Root of every exception thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed input file (JSON syntax, missing key, wrong type).
class ParseError : public Error {
public:
    using Error::Error;
};

/// Well-formed input that violates a model invariant.
class ValidationError : public Error {
public:
    using Error::Error;
};

/// Base class for failures of the numerical machinery.
class NumericalError : public Error {
public:
    using Error::Error;
};

class ConvergenceError : public NumericalError {
public:
    ConvergenceError(const std::string& what, double residual, int iterations, double time)
        : NumericalError(what), residual_(residual), iterations_(iterations), time_(time) {}

    double residual() const noexcept { return residual_; }
    int iterations() const noexcept { return iterations_; }
    /// Simulation time at which the failure happened (NaN when not applicable).
    double time() const noexcept { return time_; }

private:
    double residual_;
    int iterations_;
    double time_;
};

class SingularMatrixError : public NumericalError {
public:
    SingularMatrixError(const std::string& what, double indicator)
        : NumericalError(what), indicator_(indicator) {}

    /// Reciprocal condition estimate or smallest eigenvalue, depending on the thrower.
    double indicator() const noexcept { return indicator_; }

private:
    double indicator_;
};

class LineSearchError : public NumericalError {
public:
    LineSearchError(const std::string& what, Eigen::VectorXd iterate, Eigen::VectorXd gradient)
        : NumericalError(what), iterate_(std::move(iterate)), gradient_(std::move(gradient)) {}

    const Eigen::VectorXd& iterate() const noexcept { return iterate_; }
    const Eigen::VectorXd& gradient() const noexcept { return gradient_; }

private:
    Eigen::VectorXd iterate_;
    Eigen::VectorXd gradient_;
};

class SamplingError : public NumericalError {
public:
    SamplingError(const std::string& what, double acceptance_rate)
        : NumericalError(what), acceptance_rate_(acceptance_rate) {}

    double acceptance_rate() const noexcept { return acceptance_rate_; }

private:
    double acceptance_rate_;
};

}  // namespace gridcal
