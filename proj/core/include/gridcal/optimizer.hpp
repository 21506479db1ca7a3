// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <string>
#include <vector>

#include "gridcal/linalg.hpp"

namespace gridcal {

struct OptimizerOptions {
    int max_iters = 30;
    double pgtol = 1e-5;  ///< on ‖P(x − g) − x‖∞
    int memory = 10;
    int line_search_max_trials = 20;

    void validate() const;
};

/// Returns f(x) and writes ∇f(x) into `gradient`.
using ObjectiveFunction = std::function<double(const Vector& x, Vector& gradient)>;

struct OptimizerResult {
    Vector x;
    double value = 0.0;
    Vector gradient;
    int iterations = 0;
    int evaluations = 0;
    double pgnorm = 0.0;
    bool converged = false;
    std::string termination;      ///< "pgtol", "max_iters" or "line_search_stalled"
    std::vector<double> trace;    ///< f at the start point and after each accepted step
};

/// ‖P(x − g) − x‖∞ for the box [lower, upper].
double projected_gradient_norm(const Vector& x, const Vector& gradient, const Vector& lower, const Vector& upper);

/// Projected limited-memory BFGS on a box. Variables at a bound whose gradient
/// points outward are held fixed for the iteration; the quasi-Newton direction is
/// built on the remaining ones and the step is projected back onto the box.
/// Throws LineSearchError when no decrease is found away from the noise floor.
OptimizerResult minimize_box(const ObjectiveFunction& objective, const Vector& x0, const Vector& lower,
                             const Vector& upper, const OptimizerOptions& options = {});

}  // namespace gridcal
