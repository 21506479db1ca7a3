// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "gridcal/dae.hpp"
#include "gridcal/devices.hpp"
#include "gridcal/grid.hpp"
#include "gridcal/network.hpp"

namespace gridcal {

/// Names and partition of the state vector z = (x, y). Differential states come
/// first (machines sorted by bus id); the algebraic block holds (vr, vi) per bus
/// sorted by bus id, then the drawn current (ir, ii) per load sorted by bus id.
struct StateLayout {
    std::size_t differential = 0;
    std::size_t algebraic = 0;
    std::vector<std::string> names;

    std::size_t size() const noexcept { return differential + algebraic; }
    std::size_t index_of(std::string_view name) const;
};

/// Grid plus its steady-state operating point and device instances. Immutable,
/// safe to share across threads.
class PowerSystemModel {
public:
    explicit PowerSystemModel(GridModel grid, const PowerFlowOptions& options = {});

    const GridModel& grid() const noexcept { return grid_; }
    const StateLayout& layout() const noexcept { return layout_; }
    const PowerFlowSolution& power_flow() const noexcept { return power_flow_; }
    const std::vector<std::unique_ptr<Device>>& devices() const noexcept { return devices_; }

    /// Equilibrium z0 = (x0, y0); independent of θ.
    const Vector& initial_state() const noexcept { return z0_; }
    std::size_t num_parameters() const noexcept { return grid_.num_parameters(); }

    /// Index in z of the real voltage component of a bus (the imaginary one follows).
    std::size_t voltage_index(int bus_id) const;
    /// Steady-state voltage magnitude per bus (the v0 of the load law).
    double steady_voltage(int bus_id) const;

private:
    GridModel grid_;
    PowerFlowSolution power_flow_;
    StateLayout layout_;
    std::vector<std::unique_ptr<Device>> devices_;
    Vector z0_;
};

/// Differential and algebraic parts of the equilibrium.
struct SteadyState {
    Vector x0;
    Vector y0;
};

/// Equilibrium of the DAE at the converged power flow. θ is accepted for interface
/// symmetry; at v = v0 the load injections do not depend on it.
SteadyState initialize_steady_state(const PowerSystemModel& model, const Parameters& theta);

/// h(t, z; θ) for a model under one network view.
class PowerSystemDae final : public DaeSystem {
public:
    PowerSystemDae(const PowerSystemModel& model, const NetworkView& network);

    std::size_t differential_size() const override { return model_.layout().differential; }
    std::size_t algebraic_size() const override { return model_.layout().algebraic; }
    std::size_t parameter_size() const override { return model_.num_parameters(); }

    void evaluate(double t, const Vector& z, const Parameters& theta, Vector& h, Matrix* dh_dz,
                  Matrix* dh_dtheta) const override;

private:
    const PowerSystemModel& model_;
    const NetworkView& network_;
    Matrix base_;     ///< real form of the admittance matrix on interleaved (vr, vi)
    Matrix faulted_;
};

}  // namespace gridcal
