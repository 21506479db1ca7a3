// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>

#include <Eigen/Dense>

#include "gridcal/grid.hpp"
#include "gridcal/linalg.hpp"

namespace gridcal {

/// Dense bus admittance matrix, rows/columns in GridModel::buses() order.
Eigen::MatrixXcd build_admittance(const GridModel& grid);

/// Scenario-local view of the network: the base admittance matrix plus, while the
/// fault window [t_fault, t_clear) is open, a shunt conductance at the faulted bus.
class NetworkView {
public:
    explicit NetworkView(const GridModel& grid);
    NetworkView(const GridModel& grid, const FaultScenario& scenario);

    bool fault_active(double t) const noexcept;
    const Eigen::MatrixXcd& admittance(double t) const noexcept;

    const Eigen::MatrixXcd& base_admittance() const noexcept { return base_; }
    const Eigen::MatrixXcd& faulted_admittance() const noexcept { return faulted_; }
    const std::optional<FaultScenario>& scenario() const noexcept { return scenario_; }

private:
    Eigen::MatrixXcd base_;
    Eigen::MatrixXcd faulted_;
    std::optional<FaultScenario> scenario_;
};

NetworkView apply_fault(const GridModel& grid, const FaultScenario& scenario);

struct PowerFlowOptions {
    double tolerance = 1e-12;
    int max_iterations = 30;
};

struct PowerFlowSolution {
    Eigen::VectorXcd voltage;   ///< complex bus voltages
    Vector p_generation;        ///< per generator, in GridModel::generators() order
    Vector q_generation;
    int iterations = 0;
    double mismatch = 0.0;      ///< final power mismatch, infinity norm
};

/// Newton–Raphson power flow. Generator buses hold their v0 setpoint, loads draw (p0, q0).
PowerFlowSolution solve_power_flow(const GridModel& grid, const PowerFlowOptions& options = {});

}  // namespace gridcal
