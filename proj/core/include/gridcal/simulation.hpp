// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>
#include <span>
#include <vector>

#include "gridcal/dae.hpp"
#include "gridcal/power_system.hpp"

namespace gridcal {

struct SimulationOptions {
    NewtonOptions newton;
    int refinement = 4;  ///< internal steps per interval between requested times
};

/// Internal integration grid starting at t0 = 0. `record[k]` is the grid position
/// of the k-th requested time.
struct TimeGrid {
    std::vector<double> points;
    std::vector<std::size_t> record;
};

TimeGrid build_time_grid(std::span<const double> times, int refinement);

/// Moves t_fault and t_clear to the nearest grid points. A window that would
/// collapse keeps one step.
FaultScenario snap_to_grid(const FaultScenario& scenario, std::span<const double> points);

struct SimulationResult {
    Trajectory trajectory;
    SensitivityTrajectory sensitivities;
};

/// Trajectory from the model equilibrium at t0 = 0, sampled at `times` (strictly
/// increasing, >= 0).
Trajectory simulate(const PowerSystemModel& model, const Parameters& theta,
                    const std::optional<FaultScenario>& scenario, std::span<const double> times,
                    const SimulationOptions& options = {});

/// Trajectory and discrete forward sensitivities in one pass.
SimulationResult simulate_with_sensitivities(const PowerSystemModel& model, const Parameters& theta,
                                             const std::optional<FaultScenario>& scenario,
                                             std::span<const double> times,
                                             const SimulationOptions& options = {});

/// Sensitivities along a trajectory previously produced by simulate() with the same
/// inputs. The step factorizations are rebuilt by re-running the integration; a
/// trajectory that does not match bit for bit is rejected.
SensitivityTrajectory propagate_sensitivities(const PowerSystemModel& model, const Parameters& theta,
                                              const Trajectory& trajectory,
                                              const std::optional<FaultScenario>& scenario,
                                              const SimulationOptions& options = {});

/// Uniform schedule t_k = t_first + k * spacing, k = 0..count-1.
std::vector<double> uniform_times(double t_first, double spacing, std::size_t count);

}  // namespace gridcal
