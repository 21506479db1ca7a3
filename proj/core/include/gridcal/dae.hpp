// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/LU>

#include "gridcal/linalg.hpp"

namespace gridcal {

/// Semi-explicit DAE in mass-matrix form M z' = h(t, z; θ), with
/// z = (x differential, y algebraic) and M = blkdiag(I_n, 0).
class DaeSystem {
public:
    virtual ~DaeSystem() = default;

    virtual std::size_t differential_size() const = 0;
    virtual std::size_t algebraic_size() const = 0;
    virtual std::size_t parameter_size() const = 0;
    std::size_t state_size() const { return differential_size() + algebraic_size(); }

    /// Writes h into `h` (resized by the callee). Jacobians are filled when the
    /// pointers are non-null; they are resized and zeroed by the callee.
    virtual void evaluate(double t, const Vector& z, const Parameters& theta, Vector& h,
                          Matrix* dh_dz, Matrix* dh_dtheta) const = 0;
};

struct NewtonOptions {
    double tolerance = 1e-8;  ///< infinity norm of the backward-Euler residual
    int max_iterations = 20;
    int max_halvings = 8;
    double min_rcond = 1e-14;
};

/// Factorized step matrix (M - N dh/dz) and dh/dθ at the accepted step.
struct StepLinearization {
    Eigen::PartialPivLU<Matrix> lu;
    Matrix dh_dtheta;
};

struct StepResult {
    Vector z;
    int iterations = 0;
    double residual = 0.0;  ///< residual infinity norm at the convergence test
};

/// Backward-Euler residual M z_next - N h(t_next, z_next) - M z_prev with N = blkdiag(dt I_n, I_m).
Vector backward_euler_residual(const DaeSystem& system, const Vector& z_prev, const Vector& z_next,
                               double t_next, double dt, const Parameters& theta);

/// Solves one backward-Euler step by full Newton with a halving line search.
/// Once the residual is below tolerance, one more correction is applied with the
/// Jacobian factorized at that iterate; that factorization is returned in `linearization`.
StepResult step_backward_euler(const DaeSystem& system, const Vector& z_prev, double t_next, double dt,
                               const Parameters& theta, const NewtonOptions& options,
                               StepLinearization* linearization = nullptr);

struct Trajectory {
    std::vector<double> times;
    std::vector<Vector> states;
};

/// S_k = dz_k/dθ at each recorded time.
struct SensitivityTrajectory {
    std::vector<double> times;
    std::vector<Matrix> sensitivities;
};

struct IntegrationResult {
    Trajectory trajectory;
    std::optional<SensitivityTrajectory> sensitivities;
    int newton_iterations = 0;
};

/// Integrates across `grid` (strictly increasing, grid[0] = t0 where z0 holds) and
/// records states at the grid positions in `record`. When requested, the discrete
/// forward sensitivities (M - N dh/dz) S_{k+1} = M S_k + N dh/dθ are propagated in the
/// same pass, reusing each step's factorization.
IntegrationResult integrate(const DaeSystem& system, const Vector& z0, const Parameters& theta,
                            std::span<const double> grid, std::span<const std::size_t> record,
                            bool with_sensitivities, const NewtonOptions& options);

/// First-order surrogate z_k(θ) ≈ z_k(θ_ref) + S_k(θ_ref) (θ - θ_ref).
Trajectory simulate_tlm_surrogate(const Parameters& theta, const Parameters& theta_ref,
                                  const Trajectory& reference, const SensitivityTrajectory& sensitivities);

/// CSV with a `time` column then one column per state.
void write_trajectory_csv(const std::filesystem::path& path, const Trajectory& trajectory,
                          const std::vector<std::string>& state_names);

}  // namespace gridcal
