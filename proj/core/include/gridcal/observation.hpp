// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gridcal/linalg.hpp"
#include "gridcal/power_system.hpp"
#include "gridcal/simulation.hpp"

namespace gridcal {

/// Row selection H: channel c reads state z[indices[c]]. The same H applies at
/// every instant.
class ObservationOperator {
public:
    ObservationOperator(std::size_t state_size, std::vector<std::size_t> indices, std::vector<std::string> channels);

    /// Real and imaginary voltage of each listed bus (all buses when empty), in the
    /// given order.
    static ObservationOperator bus_voltages(const PowerSystemModel& model, const std::vector<int>& bus_ids = {});
    /// Current phasor drawn by every load, in state order.
    static ObservationOperator load_currents(const PowerSystemModel& model);
    /// PMU set: every bus voltage followed by every load current.
    static ObservationOperator voltages_and_currents(const PowerSystemModel& model);
    /// Channels named after state variables of the model layout.
    static ObservationOperator from_channels(const PowerSystemModel& model, const std::vector<std::string>& channels);

    std::size_t size() const noexcept { return indices_.size(); }
    std::size_t state_size() const noexcept { return state_size_; }
    const std::vector<std::size_t>& indices() const noexcept { return indices_; }
    const std::vector<std::string>& channels() const noexcept { return channels_; }

    /// H z.
    Vector observe(const Vector& z) const;
    /// H S for a state-space matrix S.
    Matrix apply(const Matrix& s) const;
    /// Hᵀ r.
    Vector adjoint(const Vector& r) const;

    std::vector<Vector> observe(const Trajectory& trajectory) const;

private:
    std::size_t state_size_;
    std::vector<std::size_t> indices_;
    std::vector<std::string> channels_;
};

/// Observed data d_k at times t_k with diagonal noise covariance R.
struct ObservationSet {
    std::vector<double> times;
    std::vector<Vector> data;
    Vector noise_variance;  ///< diagonal of R, one entry per channel
    std::vector<std::string> channels;
    std::optional<std::uint64_t> seed;      ///< twin experiments only
    std::optional<Parameters> theta_true;  ///< twin experiments only

    std::size_t num_channels() const noexcept { return channels.size(); }
    void validate() const;
};

/// d_k = truth_k + η_k with η_k ~ N(0, diag(variance)) drawn from the stream
/// (seed, k), so each instant is independent of the others.
std::vector<Vector> add_noise(const std::vector<Vector>& truth, const Vector& variance, std::uint64_t seed);

/// Twin-experiment data: simulate at θ_true, observe, perturb.
ObservationSet synthesize_observations(const PowerSystemModel& model, const Parameters& theta_true,
                                       const std::optional<FaultScenario>& scenario,
                                       const ObservationOperator& op, std::span<const double> times,
                                       const Vector& noise_variance, std::uint64_t seed,
                                       const SimulationOptions& options = {});

/// Long-format CSV (time, channel, value) plus a JSON sidecar with the channel list,
/// R diagonal and, when present, seed and θ_true.
void write_observations(const std::filesystem::path& csv_path, const std::filesystem::path& sidecar_path,
                        const ObservationSet& obs);
ObservationSet read_observations(const std::filesystem::path& csv_path, const std::filesystem::path& sidecar_path);

}  // namespace gridcal
