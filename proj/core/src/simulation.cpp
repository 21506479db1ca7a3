// SPDX-License-Identifier: Apache-2.0
#include "gridcal/simulation.hpp"

#include <algorithm>
#include <cmath>

#include "gridcal/csv.hpp"
#include "gridcal/error.hpp"
#include "gridcal/network.hpp"

namespace gridcal {

TimeGrid build_time_grid(std::span<const double> times, int refinement) {
    if (refinement < 1) throw ValidationError("simulation: refinement must be >= 1");
    if (times.empty()) throw ValidationError("simulation: no output times requested");
    if (!(times.front() >= 0.0)) throw ValidationError("simulation: output times must be >= 0");
    for (std::size_t k = 1; k < times.size(); ++k) {
        if (!(times[k] > times[k - 1])) {
            throw ValidationError("simulation: output times must be strictly increasing (index " +
                                  std::to_string(k) + ")");
        }
    }

    TimeGrid grid;
    grid.points.push_back(0.0);
    double previous = 0.0;
    for (double t : times) {
        if (t > previous) {
            const double span = t - previous;
            for (int j = 1; j < refinement; ++j) grid.points.push_back(previous + span * j / refinement);
            grid.points.push_back(t);
        }
        grid.record.push_back(grid.points.size() - 1);
        previous = t;
    }
    return grid;
}

namespace {

std::size_t nearest_point(std::span<const double> points, double t) {
    const auto it = std::lower_bound(points.begin(), points.end(), t);
    if (it == points.begin()) return 0;
    if (it == points.end()) return points.size() - 1;
    const auto hi = static_cast<std::size_t>(it - points.begin());
    return (t - points[hi - 1] <= points[hi] - t) ? hi - 1 : hi;
}

}  // namespace

FaultScenario snap_to_grid(const FaultScenario& scenario, std::span<const double> points) {
    if (points.empty()) throw ValidationError("snap_to_grid: empty grid");
    FaultScenario snapped = scenario;
    const double horizon = points.back();
    if (scenario.t_fault > horizon) return snapped;  // never fires inside the window
    const std::size_t on = nearest_point(points, scenario.t_fault);
    std::size_t off = scenario.t_clear > horizon ? points.size() : nearest_point(points, scenario.t_clear);
    if (off <= on) off = on + 1;
    snapped.t_fault = points[on];
    // Past the horizon the exact clearing instant is irrelevant.
    snapped.t_clear = off < points.size() ? points[off] : std::max(scenario.t_clear, horizon + 1.0);
    return snapped;
}

namespace {

IntegrationResult run(const PowerSystemModel& model, const Parameters& theta,
                      const std::optional<FaultScenario>& scenario, std::span<const double> times,
                      bool with_sensitivities, const SimulationOptions& options) {
    if (static_cast<std::size_t>(theta.size()) != model.num_parameters()) {
        throw ValidationError("simulate: parameter vector has dimension " + std::to_string(theta.size()) +
                              ", the grid has " + std::to_string(model.num_parameters()));
    }
    const TimeGrid grid = build_time_grid(times, options.refinement);
    std::optional<NetworkView> view;
    if (scenario) {
        view.emplace(model.grid(), snap_to_grid(*scenario, grid.points));
    } else {
        view.emplace(model.grid());
    }
    const PowerSystemDae dae(model, *view);
    return integrate(dae, model.initial_state(), theta, grid.points, grid.record, with_sensitivities,
                     options.newton);
}

}  // namespace

Trajectory simulate(const PowerSystemModel& model, const Parameters& theta,
                    const std::optional<FaultScenario>& scenario, std::span<const double> times,
                    const SimulationOptions& options) {
    return run(model, theta, scenario, times, false, options).trajectory;
}

SimulationResult simulate_with_sensitivities(const PowerSystemModel& model, const Parameters& theta,
                                             const std::optional<FaultScenario>& scenario,
                                             std::span<const double> times, const SimulationOptions& options) {
    IntegrationResult result = run(model, theta, scenario, times, true, options);
    return SimulationResult{std::move(result.trajectory), std::move(*result.sensitivities)};
}

SensitivityTrajectory propagate_sensitivities(const PowerSystemModel& model, const Parameters& theta,
                                              const Trajectory& trajectory,
                                              const std::optional<FaultScenario>& scenario,
                                              const SimulationOptions& options) {
    IntegrationResult result = run(model, theta, scenario, trajectory.times, true, options);
    if (result.trajectory.states.size() != trajectory.states.size()) {
        throw ValidationError("propagate_sensitivities: trajectory length does not match");
    }
    for (std::size_t k = 0; k < trajectory.states.size(); ++k) {
        if (result.trajectory.states[k] != trajectory.states[k]) {
            throw ValidationError("propagate_sensitivities: trajectory was not produced with these inputs (first "
                                  "difference at t=" + format_number(trajectory.times[k]) + ")");
        }
    }
    return std::move(*result.sensitivities);
}

std::vector<double> uniform_times(double t_first, double spacing, std::size_t count) {
    std::vector<double> times(count);
    for (std::size_t k = 0; k < count; ++k) times[k] = t_first + static_cast<double>(k) * spacing;
    return times;
}

}  // namespace gridcal
