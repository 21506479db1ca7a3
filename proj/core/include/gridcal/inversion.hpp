// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Cholesky>

#include "gridcal/linalg.hpp"
#include "gridcal/observation.hpp"
#include "gridcal/optimizer.hpp"
#include "gridcal/simulation.hpp"

namespace gridcal {

/// Gaussian N(mean, covariance) restricted to the box [lower, upper].
class TruncatedGaussian {
public:
    TruncatedGaussian(Vector mean, Matrix covariance, Vector lower, Vector upper);

    /// mean·1, variance·I on [lower, upper]^n.
    static TruncatedGaussian isotropic(std::size_t n, double mean, double variance, double lower = 0.0,
                                       double upper = 1.0);

    std::size_t dimension() const noexcept { return static_cast<std::size_t>(mean_.size()); }
    const Vector& mean() const noexcept { return mean_; }
    const Matrix& covariance() const noexcept { return covariance_; }
    const Vector& lower() const noexcept { return lower_; }
    const Vector& upper() const noexcept { return upper_; }

    /// Γ⁻¹ v.
    Vector precision_times(const Vector& v) const;
    Matrix precision() const;
    bool contains(const Vector& theta) const;

private:
    Vector mean_;
    Matrix covariance_;
    Vector lower_;
    Vector upper_;
    Eigen::LLT<Matrix> factor_;
};

/// Predicted observations H z_k(θ) at the observation instants and, on request,
/// their parameter Jacobians H S_k(θ).
struct ForwardEvaluation {
    std::vector<Vector> predictions;
    std::vector<Matrix> jacobians;  ///< empty unless requested
};

class ForwardModel {
public:
    virtual ~ForwardModel() = default;
    virtual std::size_t parameter_size() const = 0;
    virtual ForwardEvaluation evaluate(const Parameters& theta, bool with_jacobians) const = 0;
};

/// Full nonlinear DAE simulation of one scenario. Holds a reference to the model.
class PowerSystemForward final : public ForwardModel {
public:
    PowerSystemForward(const PowerSystemModel& model, std::optional<FaultScenario> scenario,
                       ObservationOperator op, std::vector<double> times, SimulationOptions options = {});

    std::size_t parameter_size() const override { return model_.num_parameters(); }
    ForwardEvaluation evaluate(const Parameters& theta, bool with_jacobians) const override;

    const ObservationOperator& observation_operator() const noexcept { return op_; }
    const std::vector<double>& times() const noexcept { return times_; }

private:
    const PowerSystemModel& model_;
    std::optional<FaultScenario> scenario_;
    ObservationOperator op_;
    std::vector<double> times_;
    SimulationOptions options_;
};

/// First-order surrogate around θ_ref with stored Jacobians:
/// H z_k(θ) ≈ H z_k(θ_ref) + H S_k(θ_ref)(θ − θ_ref).
class LinearizedForward final : public ForwardModel {
public:
    LinearizedForward(Parameters theta_ref, ForwardEvaluation reference);
    /// Linearizes `full` at θ_ref (one simulation with sensitivities).
    static LinearizedForward around(const ForwardModel& full, const Parameters& theta_ref);

    std::size_t parameter_size() const override { return static_cast<std::size_t>(theta_ref_.size()); }
    ForwardEvaluation evaluate(const Parameters& theta, bool with_jacobians) const override;

    const Parameters& theta_ref() const noexcept { return theta_ref_; }

private:
    Parameters theta_ref_;
    ForwardEvaluation reference_;
};

/// Affine map prediction_k = A_k θ + b_k.
class AffineForward final : public ForwardModel {
public:
    AffineForward(std::vector<Matrix> a, std::vector<Vector> b);

    std::size_t parameter_size() const override { return static_cast<std::size_t>(a_.front().cols()); }
    ForwardEvaluation evaluate(const Parameters& theta, bool with_jacobians) const override;

private:
    std::vector<Matrix> a_;
    std::vector<Vector> b_;
};

struct ObjectiveEvaluation {
    double value = 0.0;
    double misfit = 0.0;
    double prior = 0.0;
    std::optional<Vector> gradient;
};

/// J(θ) = ½Σ_k ‖d_k − H z_k(θ)‖²_{R⁻¹} + ½‖θ − θ_pr‖²_{Γ⁻¹} and, when requested,
/// ∇J = Σ_k (H S_k)ᵀ R⁻¹ (H z_k − d_k) + Γ⁻¹(θ − θ_pr) from the same forward pass.
ObjectiveEvaluation evaluate_objective(const Parameters& theta, const ObservationSet& obs,
                                       const TruncatedGaussian& prior, const ForwardModel& forward,
                                       bool with_gradient);

double objective(const Parameters& theta, const ObservationSet& obs, const TruncatedGaussian& prior,
                 const ForwardModel& forward);
Vector gradient(const Parameters& theta, const ObservationSet& obs, const TruncatedGaussian& prior,
                const ForwardModel& forward);

struct InversionResult {
    Parameters theta_map;
    int iterations = 0;
    int evaluations = 0;
    double final_pgnorm = 0.0;
    bool converged = false;
    std::string termination;
    std::vector<double> objective_trace;
    ObjectiveEvaluation final_objective;
};

/// MAP estimate on the prior box; starts from the prior mean unless `initial` is given.
InversionResult solve_map(const ObservationSet& obs, const TruncatedGaussian& prior, const ForwardModel& forward,
                          const OptimizerOptions& options = {}, const std::optional<Parameters>& initial = {});

std::string inversion_result_to_json(const InversionResult& result);

}  // namespace gridcal
