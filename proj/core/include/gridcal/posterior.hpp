// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "gridcal/inversion.hpp"
#include "gridcal/linalg.hpp"

namespace gridcal {

/// Laplace approximation at the MAP truncated to the prior box. Sampling
/// covariance is information⁻¹ + λI.
struct PosteriorApprox {
    Parameters theta_map;
    Matrix information;    ///< Σ_k (H S_k)ᵀ R⁻¹ (H S_k) + Γ⁻¹
    Matrix factor;         ///< lower-triangular L with L Lᵀ = information
    Vector base_sigmas;    ///< √diag(information⁻¹)
    Vector marginal_sigmas;  ///< √(base_sigmas² + λ)
    double inflation = 0.0;  ///< λ
    Vector lower;
    Vector upper;

    /// information⁻¹ + λI.
    Matrix covariance() const;
};

/// Factorizes a given information matrix. Throws SingularMatrixError with the
/// smallest eigenvalue when it is not positive definite.
PosteriorApprox make_posterior(const Parameters& theta_map, const Matrix& information, const Vector& lower,
                               const Vector& upper);

/// Information matrix from the forward Jacobians at θ_MAP plus the prior precision.
PosteriorApprox build_posterior(const Parameters& theta_map, const ObservationSet& obs,
                                const TruncatedGaussian& prior, const ForwardModel& forward);

/// Same posterior with covariance information⁻¹ + λI; θ_MAP is untouched.
PosteriorApprox inflate(const PosteriorApprox& post, double lambda);

struct SamplingOptions {
    double box_sigmas = 2.0;      ///< accept only |θ − θ_MAP| ≤ box_sigmas·σ componentwise
    std::size_t probe_batch = 1000;
    double min_acceptance = 1e-3;
    std::size_t max_attempts_per_sample = 100000;
    int jobs = 1;
};

/// Draws θ = θ_MAP + L⁻ᵀz (+ √λ ξ) until one lands in the box and in the ±σ window.
/// Sample i uses only the stream (seed, i), so output is independent of `jobs`.
std::vector<Parameters> sample_posterior(const PosteriorApprox& post, std::size_t n_samples, std::uint64_t seed,
                                         const SamplingOptions& options = {});

/// Ensemble mean and standard deviation (N − 1 denominator) per time and channel.
struct UncertaintyCone {
    std::vector<double> times;
    std::vector<std::string> channels;
    std::vector<Vector> mean;
    std::vector<Vector> sigma;
    std::size_t n_ensemble = 0;
    std::size_t failed_samples = 0;  ///< samples redrawn after a simulation failure
};

/// Maps one parameter sample to per-time vectors (states or observations).
using EnsembleMap = std::function<std::vector<Vector>(const Parameters&)>;

struct ConeOptions {
    SamplingOptions sampling;
    int max_retries = 10;  ///< redraws allowed per sample after a failed simulation
};

UncertaintyCone uncertainty_cones(const PosteriorApprox& post, const EnsembleMap& map, std::vector<double> times,
                                  std::vector<std::string> channels, std::size_t n_samples, std::uint64_t seed,
                                  const ConeOptions& options = {});

/// Cone from an explicit ensemble of per-time vectors.
UncertaintyCone ensemble_statistics(const std::vector<std::vector<Vector>>& members, std::vector<double> times,
                                    std::vector<std::string> channels);

std::string posterior_to_json(const PosteriorApprox& post);
void write_factor_csv(const std::filesystem::path& path, const PosteriorApprox& post);
/// Long-format CSV: time, channel, mean, sigma.
void write_cone_csv(const std::filesystem::path& path, const UncertaintyCone& cone);

}  // namespace gridcal
