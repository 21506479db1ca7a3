// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "gridcal/inversion.hpp"
#include "gridcal/observation.hpp"
#include "gridcal/optimizer.hpp"
#include "gridcal/posterior.hpp"
#include "gridcal/power_system.hpp"
#include "gridcal/simulation.hpp"

namespace gridcal {

inline constexpr std::string_view kRunSchema = "gridcal-run/1";
inline constexpr std::string_view kVersion = "0.1.0";

/// Observation instants t_k = offset + k / rate, k = 1..count.
struct ScheduleConfig {
    double offset = 0.0;
    double rate = 30.0;
    std::size_t count = 30;

    std::vector<double> times() const;
};

struct ContingencyConfig {
    int bus = 0;
    double impedance = 0.01;
    double t_fault = 0.05;
    std::optional<double> t_clear;  ///< default: two cycles after t_fault

    FaultScenario resolve(double base_frequency) const;
    /// Directory-safe identifier, e.g. "bus3-z0.01".
    std::string id() const;
};

struct RunConfig {
    std::filesystem::path grid_path;
    ContingencyConfig scenario;
    std::vector<int> contingency_buses;
    std::vector<double> contingency_impedances;
    double fault_time = 0.05;
    double prior_mean = 0.5;
    double prior_variance = 0.01;
    double lower = 0.0;
    double upper = 1.0;
    double truth = 0.9;
    double noise_sigma = 0.01;
    std::string channels = "voltages+currents";  ///< or "voltages"
    ScheduleConfig schedule;
    OptimizerOptions optimizer;
    SimulationOptions simulation;
    std::size_t n_ensemble = 200;
    std::vector<double> lambdas{0.0, 0.001, 0.005};
    double box_sigmas = 2.0;
    std::string cone_space = "observation";  ///< or "state"
    int timing_calls = 20;
    int refresh_max_outer = 10;
    double refresh_tol = 1e-6;
    std::uint64_t seed = 0;
    int jobs = 0;
    std::filesystem::path output;

    /// Contingency set: buses × impedances, every scenario sharing fault_time.
    std::vector<ContingencyConfig> contingencies() const;
    /// Canonical JSON of every result-affecting field (no output path, no jobs).
    std::string frozen_json() const;
};

/// Reads a run config, fills defaults, then applies "dotted.path=value" overrides.
/// An override must name a key that exists after defaults are filled. A relative
/// grid path is resolved against the config file's directory.
RunConfig load_run_config(const std::filesystem::path& path, const std::vector<std::string>& overrides = {});
RunConfig parse_run_config(std::string_view json_text, const std::filesystem::path& base_dir,
                           const std::vector<std::string>& overrides = {});

double rmse(const Vector& x, const Vector& x_true);
/// Percentage of (time, channel) pairs with |truth − mean| ≤ 2σ.
double coverage(const std::vector<Vector>& truth, const UncertaintyCone& cone);

/// Shared state for the experiments of one run config.
class Experiment {
public:
    explicit Experiment(RunConfig config);

    const RunConfig& config() const noexcept { return config_; }
    const PowerSystemModel& model() const noexcept { return model_; }
    const ObservationOperator& observation_operator() const noexcept { return op_; }
    const std::vector<double>& times() const noexcept { return times_; }
    const TruncatedGaussian& prior() const noexcept { return prior_; }
    const Parameters& theta_true() const noexcept { return theta_true_; }
    Vector noise_variance() const;

    FaultScenario scenario(const ContingencyConfig& c) const;
    PowerSystemForward forward(const ContingencyConfig& c) const;
    /// Noiseless H z_k(θ) for a contingency.
    std::vector<Vector> predict_observations(const ContingencyConfig& c, const Parameters& theta) const;
    ObservationSet synthesize(const ContingencyConfig& c) const;

private:
    RunConfig config_;
    PowerSystemModel model_;
    ObservationOperator op_;
    std::vector<double> times_;
    TruncatedGaussian prior_;
    Parameters theta_true_;
};

struct InversionExperiment {
    ContingencyConfig contingency;
    ObservationSet observations;
    std::vector<Vector> truth;  ///< noiseless observations at θ_true
    InversionResult inversion;
    PosteriorApprox posterior;
    UncertaintyCone cone;
    std::vector<double> rmse_prior;  ///< per instant, prior-mean trajectory vs truth
    std::vector<double> rmse_map;    ///< per instant, MAP trajectory vs truth
};

InversionExperiment run_inversion_experiment(const Experiment& experiment, const ContingencyConfig& contingency);

struct PredictionCell {
    std::size_t calibration = 0;  ///< index into PredictionReport::contingencies
    std::size_t prediction = 0;
    double lambda = 0.0;
    std::vector<double> rmse;  ///< per instant, cone mean vs truth
    double mean_rmse = 0.0;
    double coverage = 0.0;
    double coverage_error = 0.0;
    UncertaintyCone cone;
};

struct PredictionReport {
    std::vector<ContingencyConfig> contingencies;
    std::vector<std::size_t> calibrations;  ///< rows that were calibrated
    std::vector<double> lambdas;
    std::vector<InversionExperiment> inversions;  ///< one per calibrated row, same order
    std::vector<PredictionCell> cells;
    std::vector<std::string> failures;  ///< one entry per failed row
    bool complete = true;

    /// Mean coverage over cells with the given λ.
    double mean_coverage(double lambda) const;
};

/// Calibrates on each contingency in `calibrations` (all when empty) and predicts
/// every contingency from each posterior at every λ.
PredictionReport run_prediction_matrix(const Experiment& experiment, const std::vector<ContingencyConfig>& contingencies,
                                       const std::vector<std::size_t>& calibrations = {});

struct TlmModeResult {
    std::string mode;  ///< full, tlm-at-truth, tlm-at-prior, tlm-refreshed
    Parameters theta_map;
    double parameter_error = 0.0;  ///< ‖θ_MAP − θ_true‖₂
    std::vector<double> rmse;      ///< full-model MAP trajectory vs truth, per instant
    int iterations = 0;
    int outer_iterations = 0;  ///< relinearizations (refreshed mode)
    double objective_seconds = 0.0;
    double gradient_seconds = 0.0;
    double linearization_seconds = 0.0;  ///< 0 for the full model
};

struct TlmComparison {
    ContingencyConfig contingency;
    std::vector<double> times;
    std::vector<TlmModeResult> modes;
    const TlmModeResult& mode(std::string_view name) const;
};

/// `timing_calls` = 0 skips the timing measurements.
TlmComparison run_tlm_comparison(const Experiment& experiment, const ContingencyConfig& contingency,
                                 int timing_calls);

/// Run-directory writers.
void write_config(const std::filesystem::path& dir, const RunConfig& config);
void write_metadata(const std::filesystem::path& dir, const std::string& command, const std::string& extra_json);
void write_simulation(const std::filesystem::path& dir, const Experiment& experiment, const ContingencyConfig& c);
void write_observation_artifacts(const std::filesystem::path& dir, const Experiment& experiment,
                                 const ContingencyConfig& c, const ObservationSet& obs,
                                 const std::vector<Vector>& truth);
void write_inversion_experiment(const std::filesystem::path& dir, const Experiment& experiment,
                                const InversionExperiment& result);
void write_prediction_report(const std::filesystem::path& dir, const Experiment& experiment,
                             const PredictionReport& report);
void write_tlm_comparison(const std::filesystem::path& dir, const TlmComparison& comparison);
/// Timing-free JSON for the deterministic tree; timings go to metadata.
std::string tlm_timings_json(const TlmComparison& comparison);
void write_failure_record(const std::filesystem::path& dir, const std::string& command, const std::string& kind,
                          const std::string& message);

/// SVG plots and CSV tables from the artifacts in `dir`; returns the files written.
std::vector<std::filesystem::path> emit_report(const std::filesystem::path& dir);

}  // namespace gridcal
