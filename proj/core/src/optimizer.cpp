// SPDX-License-Identifier: Apache-2.0
#include "gridcal/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>

#include "gridcal/csv.hpp"
#include "gridcal/error.hpp"

namespace gridcal {

namespace {

constexpr double kArmijo = 1e-4;
// Relative change in f below which a failed line search is attributed to the
// noise of the objective rather than to a bad direction.
constexpr double kNoiseFloor = 1e-9;

struct Pair {
    Vector s;
    Vector y;
};

Vector project(const Vector& x, const Vector& lower, const Vector& upper) {
    return x.cwiseMax(lower).cwiseMin(upper);
}

Eigen::Array<bool, Eigen::Dynamic, 1> free_variables(const Vector& x, const Vector& g, const Vector& lower,
                                                     const Vector& upper) {
    Eigen::Array<bool, Eigen::Dynamic, 1> free(x.size());
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        const bool pinned_low = x(i) <= lower(i) && g(i) > 0.0;
        const bool pinned_high = x(i) >= upper(i) && g(i) < 0.0;
        free(i) = !(pinned_low || pinned_high);
    }
    return free;
}

Vector mask(const Vector& v, const Eigen::Array<bool, Eigen::Dynamic, 1>& free) {
    return free.select(v, Vector::Zero(v.size()));
}

// Two-loop recursion on the free subspace.
Vector quasi_newton_direction(const Vector& g, const Eigen::Array<bool, Eigen::Dynamic, 1>& free,
                              const std::deque<Pair>& pairs) {
    struct Masked {
        Vector s;
        Vector y;
        double rho;
        double alpha = 0.0;
    };
    std::vector<Masked> usable;
    for (const Pair& p : pairs) {
        Vector s = mask(p.s, free);
        Vector y = mask(p.y, free);
        const double sy = s.dot(y);
        if (sy > std::numeric_limits<double>::epsilon() * y.squaredNorm() && sy > 0.0) {
            usable.push_back({std::move(s), std::move(y), 1.0 / sy});
        }
    }
    Vector q = mask(g, free);
    for (auto it = usable.rbegin(); it != usable.rend(); ++it) {
        it->alpha = it->rho * it->s.dot(q);
        q -= it->alpha * it->y;
    }
    double gamma = 1.0;
    if (!usable.empty()) gamma = 1.0 / (usable.back().rho * usable.back().y.squaredNorm());
    Vector r = gamma * q;
    for (auto& m : usable) {
        const double beta = m.rho * m.y.dot(r);
        r += (m.alpha - beta) * m.s;
    }
    return -mask(r, free);
}

}  // namespace

void OptimizerOptions::validate() const {
    if (max_iters < 0) throw ValidationError("optimizer.max_iters must be >= 0");
    if (!(pgtol > 0.0)) throw ValidationError("optimizer.pgtol must be > 0");
    if (memory < 1) throw ValidationError("optimizer.memory must be >= 1");
    if (line_search_max_trials < 1) throw ValidationError("optimizer.line_search_max_trials must be >= 1");
}

double projected_gradient_norm(const Vector& x, const Vector& gradient, const Vector& lower, const Vector& upper) {
    return (project(x - gradient, lower, upper) - x).lpNorm<Eigen::Infinity>();
}

OptimizerResult minimize_box(const ObjectiveFunction& objective, const Vector& x0, const Vector& lower,
                             const Vector& upper, const OptimizerOptions& options) {
    options.validate();
    if (x0.size() != lower.size() || x0.size() != upper.size()) {
        throw ValidationError("minimize_box: start point and bounds differ in dimension");
    }
    if (!(lower.array() <= upper.array()).all()) throw ValidationError("minimize_box: lower bound exceeds upper bound");

    OptimizerResult result;
    Vector x = project(x0, lower, upper);
    Vector g;
    double f = objective(x, g);
    ++result.evaluations;
    if (!std::isfinite(f) || !g.allFinite()) {
        throw NumericalError("minimize_box: objective is not finite at the start point");
    }
    result.trace.push_back(f);

    std::deque<Pair> pairs;
    for (;;) {
        result.pgnorm = projected_gradient_norm(x, g, lower, upper);
        if (result.pgnorm < options.pgtol) {
            result.converged = true;
            result.termination = "pgtol";
            break;
        }
        if (result.iterations >= options.max_iters) {
            result.termination = "max_iters";
            break;
        }

        const auto free = free_variables(x, g, lower, upper);
        bool accepted = false;
        bool stalled = false;
        Vector x_new;
        Vector g_new;
        double f_new = f;
        for (int attempt = 0; attempt < 2 && !accepted; ++attempt) {
            if (attempt == 1) {
                if (pairs.empty()) break;
                pairs.clear();  // retry along steepest descent
            }
            Vector d = quasi_newton_direction(g, free, pairs);
            if (!(g.dot(d) < 0.0)) {
                pairs.clear();
                d = -mask(g, free);
            }
            const double d_norm = d.lpNorm<Eigen::Infinity>();
            if (d_norm == 0.0) break;
            double t = pairs.empty() ? std::min(1.0, 1.0 / d_norm) : 1.0;

            double last_change = std::numeric_limits<double>::infinity();
            double last_slope = -std::numeric_limits<double>::infinity();
            for (int trial = 0; trial < options.line_search_max_trials; ++trial) {
                Vector x_trial = project(x + t * d, lower, upper);
                const Vector s = x_trial - x;
                if (s.lpNorm<Eigen::Infinity>() == 0.0) break;
                const double slope = g.dot(s);
                Vector g_trial;
                const double f_trial = objective(x_trial, g_trial);
                ++result.evaluations;
                if (std::isfinite(f_trial) && g_trial.allFinite()) {
                    last_change = f_trial - f;
                    last_slope = slope;
                    const bool armijo = f_trial <= f + kArmijo * slope;
                    const bool approximate_wolfe = f_trial <= f && g_trial.dot(s) <= (2.0 * kArmijo - 1.0) * slope;
                    if (slope < 0.0 && (armijo || approximate_wolfe)) {
                        x_new = std::move(x_trial);
                        g_new = std::move(g_trial);
                        f_new = f_trial;
                        accepted = true;
                        break;
                    }
                    // Safeguarded quadratic interpolation along the projected path.
                    const double curvature = f_trial - f - slope;
                    double shrink = 0.5;
                    if (curvature > 0.0 && slope < 0.0) shrink = std::clamp(-slope / (2.0 * curvature), 0.1, 0.5);
                    t *= shrink;
                } else {
                    t *= 0.1;
                }
            }
            const double scale = std::max(1.0, std::abs(f));
            if (!accepted && std::abs(last_change) <= kNoiseFloor * scale && std::abs(last_slope) <= kNoiseFloor * scale) {
                stalled = true;
            }
        }

        if (!accepted) {
            if (stalled || free.count() == 0) {
                result.termination = "line_search_stalled";
                break;
            }
            throw LineSearchError("line search found no decrease at iteration " + std::to_string(result.iterations) +
                                      " (f=" + format_number(f) + ", projected gradient " +
                                      format_number(result.pgnorm) + ")",
                                  x, g);
        }

        Pair pair{x_new - x, g_new - g};
        if (pair.s.dot(pair.y) > std::numeric_limits<double>::epsilon() * pair.y.squaredNorm()) {
            pairs.push_back(std::move(pair));
            if (static_cast<int>(pairs.size()) > options.memory) pairs.pop_front();
        }
        x = std::move(x_new);
        g = std::move(g_new);
        f = f_new;
        result.trace.push_back(f);
        ++result.iterations;
    }

    result.x = std::move(x);
    result.value = f;
    result.gradient = std::move(g);
    return result;
}

}  // namespace gridcal
