// SPDX-License-Identifier: Apache-2.0
#include "gridcal/dae.hpp"

#include <cmath>

#include "gridcal/csv.hpp"
#include "gridcal/error.hpp"

namespace gridcal {

namespace {

void assemble_residual(const DaeSystem& system, const Vector& z_prev, const Vector& z_next,
                       const Vector& h, double dt, Vector& residual) {
    const auto n = static_cast<Eigen::Index>(system.differential_size());
    const auto size = static_cast<Eigen::Index>(system.state_size());
    residual.resize(size);
    residual.head(n) = z_next.head(n) - dt * h.head(n) - z_prev.head(n);
    residual.tail(size - n) = -h.tail(size - n);
}

// In place: dh/dz -> M - N dh/dz.
void assemble_step_matrix(Eigen::Index n, double dt, Matrix& jac) {
    jac.topRows(n) *= -dt;
    jac.bottomRows(jac.rows() - n) *= -1.0;
    jac.diagonal().head(n).array() += 1.0;
}

}  // namespace

Vector backward_euler_residual(const DaeSystem& system, const Vector& z_prev, const Vector& z_next,
                               double t_next, double dt, const Parameters& theta) {
    Vector h;
    system.evaluate(t_next, z_next, theta, h, nullptr, nullptr);
    Vector residual;
    assemble_residual(system, z_prev, z_next, h, dt, residual);
    return residual;
}

StepResult step_backward_euler(const DaeSystem& system, const Vector& z_prev, double t_next, double dt,
                               const Parameters& theta, const NewtonOptions& options,
                               StepLinearization* linearization) {
    if (!(dt > 0.0)) throw ValidationError("step_backward_euler: dt must be > 0");
    const auto n = static_cast<Eigen::Index>(system.differential_size());

    Vector z = z_prev;
    Vector h;
    Vector residual;
    Matrix jac;
    Matrix dh_dtheta;
    Eigen::PartialPivLU<Matrix> lu;

    system.evaluate(t_next, z, theta, h, &jac, linearization ? &dh_dtheta : nullptr);
    assemble_residual(system, z_prev, z, h, dt, residual);
    double norm = residual.lpNorm<Eigen::Infinity>();

    for (int iteration = 0;; ++iteration) {
        if (!std::isfinite(norm)) {
            throw ConvergenceError("Newton iteration produced a non-finite residual", norm, iteration, t_next);
        }
        assemble_step_matrix(n, dt, jac);
        lu.compute(jac);
        const double rcond = lu.rcond();
        if (!(rcond > options.min_rcond)) {
            throw SingularMatrixError("singular backward-Euler iteration matrix at t=" + format_number(t_next) +
                                          " (rcond " + format_number(rcond) + ")",
                                      rcond);
        }
        const Vector step = lu.solve(-residual);

        if (norm < options.tolerance) {
            StepResult result{z + step, iteration + 1, norm};
            if (linearization) {
                linearization->lu = std::move(lu);
                linearization->dh_dtheta = std::move(dh_dtheta);
            }
            return result;
        }
        if (iteration + 1 >= options.max_iterations) {
            throw ConvergenceError("Newton did not converge at t=" + format_number(t_next) + " after " +
                                       std::to_string(iteration + 1) + " iterations, residual " +
                                       format_number(norm),
                                   norm, iteration + 1, t_next);
        }

        // Halving line search on residual increase.
        double alpha = 1.0;
        Vector trial = z + step;
        Vector trial_residual;
        system.evaluate(t_next, trial, theta, h, nullptr, nullptr);
        assemble_residual(system, z_prev, trial, h, dt, trial_residual);
        double trial_norm = trial_residual.lpNorm<Eigen::Infinity>();
        for (int halving = 0; halving < options.max_halvings && !(trial_norm <= norm); ++halving) {
            alpha *= 0.5;
            trial = z + alpha * step;
            system.evaluate(t_next, trial, theta, h, nullptr, nullptr);
            assemble_residual(system, z_prev, trial, h, dt, trial_residual);
            trial_norm = trial_residual.lpNorm<Eigen::Infinity>();
        }
        z = std::move(trial);
        system.evaluate(t_next, z, theta, h, &jac, linearization ? &dh_dtheta : nullptr);
        assemble_residual(system, z_prev, z, h, dt, residual);
        norm = residual.lpNorm<Eigen::Infinity>();
    }
}

IntegrationResult integrate(const DaeSystem& system, const Vector& z0, const Parameters& theta,
                            std::span<const double> grid, std::span<const std::size_t> record,
                            bool with_sensitivities, const NewtonOptions& options) {
    const auto size = static_cast<Eigen::Index>(system.state_size());
    const auto n = static_cast<Eigen::Index>(system.differential_size());
    const auto np = static_cast<Eigen::Index>(system.parameter_size());
    if (z0.size() != size) {
        throw ValidationError("integrate: initial state has dimension " + std::to_string(z0.size()) +
                              ", expected " + std::to_string(size));
    }
    if (theta.size() != np) {
        throw ValidationError("integrate: parameter vector has dimension " + std::to_string(theta.size()) +
                              ", expected " + std::to_string(np));
    }
    if (grid.empty()) throw ValidationError("integrate: empty time grid");
    for (std::size_t k = 1; k < grid.size(); ++k) {
        if (!(grid[k] > grid[k - 1])) throw ValidationError("integrate: time grid must be strictly increasing");
    }
    for (std::size_t k = 0; k < record.size(); ++k) {
        if (record[k] >= grid.size() || (k > 0 && record[k] <= record[k - 1])) {
            throw ValidationError("integrate: record indices must be increasing and inside the grid");
        }
    }

    IntegrationResult result;
    result.trajectory.times.reserve(record.size());
    result.trajectory.states.reserve(record.size());
    if (with_sensitivities) result.sensitivities.emplace();

    Vector z = z0;
    Matrix s = Matrix::Zero(size, np);
    StepLinearization linearization;
    std::size_t next_record = 0;

    auto maybe_record = [&](std::size_t index) {
        if (next_record < record.size() && record[next_record] == index) {
            result.trajectory.times.push_back(grid[index]);
            result.trajectory.states.push_back(z);
            if (with_sensitivities) {
                result.sensitivities->times.push_back(grid[index]);
                result.sensitivities->sensitivities.push_back(s);
            }
            ++next_record;
        }
    };

    maybe_record(0);
    for (std::size_t k = 1; k < grid.size() && next_record < record.size(); ++k) {
        const double dt = grid[k] - grid[k - 1];
        StepResult step = step_backward_euler(system, z, grid[k], dt, theta, options,
                                              with_sensitivities ? &linearization : nullptr);
        result.newton_iterations += step.iterations;
        z = std::move(step.z);
        if (with_sensitivities) {
            Matrix rhs = dt * linearization.dh_dtheta;
            rhs.topRows(n) += s.topRows(n);
            rhs.bottomRows(size - n) = linearization.dh_dtheta.bottomRows(size - n);
            s = linearization.lu.solve(rhs);
        }
        maybe_record(k);
    }
    return result;
}

Trajectory simulate_tlm_surrogate(const Parameters& theta, const Parameters& theta_ref,
                                  const Trajectory& reference, const SensitivityTrajectory& sensitivities) {
    if (reference.states.size() != sensitivities.sensitivities.size()) {
        throw ValidationError("simulate_tlm_surrogate: trajectory and sensitivities differ in length");
    }
    if (theta.size() != theta_ref.size()) {
        throw ValidationError("simulate_tlm_surrogate: theta and theta_ref differ in dimension");
    }
    const Vector delta = theta - theta_ref;
    Trajectory out;
    out.times = reference.times;
    out.states.reserve(reference.states.size());
    for (std::size_t k = 0; k < reference.states.size(); ++k) {
        const Matrix& s = sensitivities.sensitivities[k];
        if (s.cols() != theta.size() || s.rows() != reference.states[k].size()) {
            throw ValidationError("simulate_tlm_surrogate: sensitivity matrix is " + std::to_string(s.rows()) +
                                  "x" + std::to_string(s.cols()) + ", parameters have dimension " +
                                  std::to_string(theta.size()));
        }
        if (delta.isZero(0.0)) {
            out.states.push_back(reference.states[k]);
        } else {
            out.states.push_back(reference.states[k] + s * delta);
        }
    }
    return out;
}

void write_trajectory_csv(const std::filesystem::path& path, const Trajectory& trajectory,
                          const std::vector<std::string>& state_names) {
    CsvTable table;
    table.header.push_back("time");
    table.header.insert(table.header.end(), state_names.begin(), state_names.end());
    for (std::size_t k = 0; k < trajectory.times.size(); ++k) {
        const Vector& z = trajectory.states[k];
        if (static_cast<std::size_t>(z.size()) != state_names.size()) {
            throw ValidationError("write_trajectory_csv: state dimension does not match the column names");
        }
        std::vector<std::string> row{format_number(trajectory.times[k])};
        for (Eigen::Index i = 0; i < z.size(); ++i) row.push_back(format_number(z(i)));
        table.rows.push_back(std::move(row));
    }
    write_csv(path, table);
}

}  // namespace gridcal
