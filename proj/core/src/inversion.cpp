// SPDX-License-Identifier: Apache-2.0
#include "gridcal/inversion.hpp"

#include <cmath>

#include <nlohmann/json.hpp>

#include "gridcal/csv.hpp"
#include "gridcal/error.hpp"

namespace gridcal {

namespace {

std::vector<double> to_std(const Vector& v) { return {v.data(), v.data() + v.size()}; }

}  // namespace

TruncatedGaussian::TruncatedGaussian(Vector mean, Matrix covariance, Vector lower, Vector upper)
    : mean_(std::move(mean)), covariance_(std::move(covariance)), lower_(std::move(lower)), upper_(std::move(upper)) {
    const Eigen::Index n = mean_.size();
    if (n == 0) throw ValidationError("prior: empty parameter vector");
    if (covariance_.rows() != n || covariance_.cols() != n || lower_.size() != n || upper_.size() != n) {
        throw ValidationError("prior: mean, covariance and bounds differ in dimension");
    }
    if (!covariance_.isApprox(covariance_.transpose(), 1e-12)) throw ValidationError("prior: covariance is not symmetric");
    factor_.compute(covariance_);
    if (factor_.info() != Eigen::Success) throw ValidationError("prior: covariance is not positive definite");
    for (Eigen::Index i = 0; i < n; ++i) {
        if (!(lower_(i) < upper_(i))) {
            throw ValidationError("prior: lower bound must be < upper bound (component " + std::to_string(i) + ")");
        }
        if (!(mean_(i) >= lower_(i) && mean_(i) <= upper_(i))) {
            throw ValidationError("prior: mean component " + std::to_string(i) + " = " + format_number(mean_(i)) +
                                  " lies outside the box");
        }
    }
}

TruncatedGaussian TruncatedGaussian::isotropic(std::size_t n, double mean, double variance, double lower, double upper) {
    const auto size = static_cast<Eigen::Index>(n);
    return TruncatedGaussian(Vector::Constant(size, mean), variance * Matrix::Identity(size, size),
                             Vector::Constant(size, lower), Vector::Constant(size, upper));
}

Vector TruncatedGaussian::precision_times(const Vector& v) const { return factor_.solve(v); }

Matrix TruncatedGaussian::precision() const {
    return factor_.solve(Matrix::Identity(mean_.size(), mean_.size()));
}

bool TruncatedGaussian::contains(const Vector& theta) const {
    return theta.size() == mean_.size() && (theta.array() >= lower_.array()).all() &&
           (theta.array() <= upper_.array()).all();
}

PowerSystemForward::PowerSystemForward(const PowerSystemModel& model, std::optional<FaultScenario> scenario,
                                       ObservationOperator op, std::vector<double> times, SimulationOptions options)
    : model_(model), scenario_(std::move(scenario)), op_(std::move(op)), times_(std::move(times)), options_(options) {
    if (op_.state_size() != model_.layout().size()) {
        throw ValidationError("forward model: observation operator was built for a different grid");
    }
}

ForwardEvaluation PowerSystemForward::evaluate(const Parameters& theta, bool with_jacobians) const {
    ForwardEvaluation out;
    if (with_jacobians) {
        const SimulationResult sim = simulate_with_sensitivities(model_, theta, scenario_, times_, options_);
        out.predictions = op_.observe(sim.trajectory);
        out.jacobians.reserve(sim.sensitivities.sensitivities.size());
        for (const Matrix& s : sim.sensitivities.sensitivities) out.jacobians.push_back(op_.apply(s));
    } else {
        out.predictions = op_.observe(simulate(model_, theta, scenario_, times_, options_));
    }
    return out;
}

LinearizedForward::LinearizedForward(Parameters theta_ref, ForwardEvaluation reference)
    : theta_ref_(std::move(theta_ref)), reference_(std::move(reference)) {
    if (reference_.jacobians.size() != reference_.predictions.size()) {
        throw ValidationError("linearized forward model: reference lacks Jacobians");
    }
    for (const Matrix& j : reference_.jacobians) {
        if (j.cols() != theta_ref_.size()) {
            throw ValidationError("linearized forward model: Jacobian has " + std::to_string(j.cols()) +
                                  " columns, parameters have dimension " + std::to_string(theta_ref_.size()));
        }
    }
}

LinearizedForward LinearizedForward::around(const ForwardModel& full, const Parameters& theta_ref) {
    return LinearizedForward(theta_ref, full.evaluate(theta_ref, true));
}

ForwardEvaluation LinearizedForward::evaluate(const Parameters& theta, bool with_jacobians) const {
    if (theta.size() != theta_ref_.size()) {
        throw ValidationError("linearized forward model: parameter dimension mismatch");
    }
    const Vector delta = theta - theta_ref_;
    ForwardEvaluation out;
    out.predictions.reserve(reference_.predictions.size());
    for (std::size_t k = 0; k < reference_.predictions.size(); ++k) {
        out.predictions.push_back(reference_.predictions[k] + reference_.jacobians[k] * delta);
    }
    if (with_jacobians) out.jacobians = reference_.jacobians;
    return out;
}

AffineForward::AffineForward(std::vector<Matrix> a, std::vector<Vector> b) : a_(std::move(a)), b_(std::move(b)) {
    if (a_.empty() || a_.size() != b_.size()) throw ValidationError("affine forward model: need one (A_k, b_k) per instant");
    for (std::size_t k = 0; k < a_.size(); ++k) {
        if (a_[k].rows() != b_[k].size() || a_[k].cols() != a_.front().cols()) {
            throw ValidationError("affine forward model: inconsistent shapes at instant " + std::to_string(k));
        }
    }
}

ForwardEvaluation AffineForward::evaluate(const Parameters& theta, bool with_jacobians) const {
    if (theta.size() != a_.front().cols()) throw ValidationError("affine forward model: parameter dimension mismatch");
    ForwardEvaluation out;
    for (std::size_t k = 0; k < a_.size(); ++k) out.predictions.push_back(a_[k] * theta + b_[k]);
    if (with_jacobians) out.jacobians = a_;
    return out;
}

ObjectiveEvaluation evaluate_objective(const Parameters& theta, const ObservationSet& obs,
                                       const TruncatedGaussian& prior, const ForwardModel& forward,
                                       bool with_gradient) {
    if (static_cast<std::size_t>(theta.size()) != prior.dimension() || forward.parameter_size() != prior.dimension()) {
        throw ValidationError("objective: parameter dimension mismatch");
    }
    if (!prior.contains(theta)) throw ValidationError("objective: θ lies outside the prior box");

    const ForwardEvaluation eval = forward.evaluate(theta, with_gradient);
    if (eval.predictions.size() != obs.data.size()) {
        throw ValidationError("objective: forward model predicts " + std::to_string(eval.predictions.size()) +
                              " instants, observations have " + std::to_string(obs.data.size()));
    }
    const Vector inv_r = obs.noise_variance.cwiseInverse();

    ObjectiveEvaluation out;
    Vector grad = Vector::Zero(theta.size());
    for (std::size_t k = 0; k < obs.data.size(); ++k) {
        if (eval.predictions[k].size() != obs.data[k].size()) {
            throw ValidationError("objective: prediction and data differ in length at instant " + std::to_string(k));
        }
        const Vector residual = eval.predictions[k] - obs.data[k];
        const Vector weighted = inv_r.cwiseProduct(residual);
        out.misfit += 0.5 * residual.dot(weighted);
        if (with_gradient) grad.noalias() += eval.jacobians[k].transpose() * weighted;
    }
    const Vector offset = theta - prior.mean();
    const Vector scaled = prior.precision_times(offset);
    out.prior = 0.5 * offset.dot(scaled);
    out.value = out.misfit + out.prior;
    if (with_gradient) out.gradient = grad + scaled;
    return out;
}

double objective(const Parameters& theta, const ObservationSet& obs, const TruncatedGaussian& prior,
                 const ForwardModel& forward) {
    return evaluate_objective(theta, obs, prior, forward, false).value;
}

Vector gradient(const Parameters& theta, const ObservationSet& obs, const TruncatedGaussian& prior,
                const ForwardModel& forward) {
    return *evaluate_objective(theta, obs, prior, forward, true).gradient;
}

InversionResult solve_map(const ObservationSet& obs, const TruncatedGaussian& prior, const ForwardModel& forward,
                          const OptimizerOptions& options, const std::optional<Parameters>& initial) {
    obs.validate();
    const Parameters start = initial.value_or(prior.mean());
    if (!prior.contains(start)) throw ValidationError("solve_map: initial point lies outside the prior box");

    const ObjectiveFunction fn = [&](const Vector& theta, Vector& grad) {
        ObjectiveEvaluation e = evaluate_objective(theta, obs, prior, forward, true);
        grad = std::move(*e.gradient);
        return e.value;
    };
    OptimizerResult opt = minimize_box(fn, start, prior.lower(), prior.upper(), options);

    InversionResult result;
    result.theta_map = std::move(opt.x);
    result.iterations = opt.iterations;
    result.evaluations = opt.evaluations;
    result.final_pgnorm = opt.pgnorm;
    result.converged = opt.converged;
    result.termination = std::move(opt.termination);
    result.objective_trace = std::move(opt.trace);
    result.final_objective = evaluate_objective(result.theta_map, obs, prior, forward, false);
    return result;
}

std::string inversion_result_to_json(const InversionResult& result) {
    nlohmann::json j;
    j["theta_map"] = to_std(result.theta_map);
    j["iterations"] = result.iterations;
    j["evaluations"] = result.evaluations;
    j["final_pgnorm"] = result.final_pgnorm;
    j["converged"] = result.converged;
    j["termination"] = result.termination;
    j["objective"] = {{"value", result.final_objective.value},
                      {"misfit", result.final_objective.misfit},
                      {"prior", result.final_objective.prior}};
    j["objective_trace"] = result.objective_trace;
    return j.dump(2) + "\n";
}

}  // namespace gridcal
