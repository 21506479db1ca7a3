// SPDX-License-Identifier: Apache-2.0
#include "gridcal/network.hpp"

#include <cmath>
#include <limits>
#include <vector>

#include "gridcal/csv.hpp"
#include "gridcal/error.hpp"

namespace gridcal {

Eigen::MatrixXcd build_admittance(const GridModel& grid) {
    const auto n = static_cast<Eigen::Index>(grid.buses().size());
    Eigen::MatrixXcd y = Eigen::MatrixXcd::Zero(n, n);
    for (const Branch& br : grid.branches()) {
        const auto i = static_cast<Eigen::Index>(grid.bus_index(br.from));
        const auto k = static_cast<Eigen::Index>(grid.bus_index(br.to));
        const std::complex<double> half_shunt = 0.5 * br.shunt_admittance;
        y(i, i) += br.series_admittance + half_shunt;
        y(k, k) += br.series_admittance + half_shunt;
        y(i, k) -= br.series_admittance;
        y(k, i) -= br.series_admittance;
    }
    return y;
}

NetworkView::NetworkView(const GridModel& grid) : base_(build_admittance(grid)), faulted_(base_) {}

NetworkView::NetworkView(const GridModel& grid, const FaultScenario& scenario)
    : base_(build_admittance(grid)), faulted_(base_), scenario_(scenario) {
    scenario.validate();
    if (!grid.has_bus(scenario.bus)) {
        throw ValidationError("fault scenario references unknown bus id " + std::to_string(scenario.bus));
    }
    const auto i = static_cast<Eigen::Index>(grid.bus_index(scenario.bus));
    faulted_(i, i) += 1.0 / scenario.fault_impedance;
}

bool NetworkView::fault_active(double t) const noexcept {
    return scenario_ && t >= scenario_->t_fault && t < scenario_->t_clear;
}

const Eigen::MatrixXcd& NetworkView::admittance(double t) const noexcept {
    return fault_active(t) ? faulted_ : base_;
}

NetworkView apply_fault(const GridModel& grid, const FaultScenario& scenario) {
    return NetworkView(grid, scenario);
}

PowerFlowSolution solve_power_flow(const GridModel& grid, const PowerFlowOptions& options) {
    using Complex = std::complex<double>;
    const auto& buses = grid.buses();
    const auto n = static_cast<Eigen::Index>(buses.size());
    const Eigen::MatrixXcd y = build_admittance(grid);

    std::vector<bool> has_generator(buses.size(), false);
    Eigen::VectorXcd s_spec = Eigen::VectorXcd::Zero(n);
    for (const auto& g : grid.generators()) {
        const auto i = grid.bus_index(g.bus);
        has_generator[i] = true;
        s_spec(static_cast<Eigen::Index>(i)) += g.p_set;
    }
    for (const auto& l : grid.loads()) {
        s_spec(static_cast<Eigen::Index>(grid.bus_index(l.bus))) -= Complex(l.p0, l.q0);
    }

    // Unknowns: angles at every non-slack bus, magnitudes at load (PQ) buses.
    std::vector<Eigen::Index> angle_buses;
    std::vector<Eigen::Index> magnitude_buses;
    for (Eigen::Index i = 0; i < n; ++i) {
        if (static_cast<std::size_t>(i) == grid.slack_index()) continue;
        angle_buses.push_back(i);
        if (!has_generator[static_cast<std::size_t>(i)]) magnitude_buses.push_back(i);
    }
    const auto na = static_cast<Eigen::Index>(angle_buses.size());
    const auto nm = static_cast<Eigen::Index>(magnitude_buses.size());

    Vector vm(n);
    Vector va(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        vm(i) = buses[static_cast<std::size_t>(i)].v0;
        va(i) = buses[static_cast<std::size_t>(i)].angle0;
    }

    auto voltage = [&] {
        Eigen::VectorXcd v(n);
        for (Eigen::Index i = 0; i < n; ++i) v(i) = std::polar(vm(i), va(i));
        return v;
    };
    auto mismatch_vector = [&](const Eigen::VectorXcd& v) {
        const Eigen::VectorXcd s = v.array() * (y * v).conjugate().array();
        const Eigen::VectorXcd ds = s - s_spec;
        Vector f(na + nm);
        for (Eigen::Index k = 0; k < na; ++k) f(k) = ds(angle_buses[static_cast<std::size_t>(k)]).real();
        for (Eigen::Index k = 0; k < nm; ++k) f(na + k) = ds(magnitude_buses[static_cast<std::size_t>(k)]).imag();
        return f;
    };

    PowerFlowSolution result;
    Eigen::VectorXcd v = voltage();
    Vector f = mismatch_vector(v);
    double norm = f.size() ? f.lpNorm<Eigen::Infinity>() : 0.0;
    int iteration = 0;
    while (norm > options.tolerance) {
        if (iteration >= options.max_iterations) {
            throw ConvergenceError("power flow did not converge after " + std::to_string(iteration) +
                                       " iterations, mismatch " + format_number(norm),
                                   norm, iteration, std::numeric_limits<double>::quiet_NaN());
        }
        // Complex power sensitivities in the polar parameterization.
        const Eigen::VectorXcd current = y * v;
        const Eigen::VectorXcd unit = v.array() / vm.array();
        const Eigen::MatrixXcd ds_dva =
            Complex(0, 1) * v.asDiagonal() *
            (Eigen::MatrixXcd(current.asDiagonal()) - y * v.asDiagonal()).conjugate();
        const Eigen::MatrixXcd ds_dvm =
            v.asDiagonal() * (y * unit.asDiagonal()).conjugate() +
            Eigen::MatrixXcd(current.conjugate().asDiagonal()) * unit.asDiagonal();

        Matrix jac(na + nm, na + nm);
        for (Eigen::Index r = 0; r < na; ++r) {
            const auto bi = angle_buses[static_cast<std::size_t>(r)];
            for (Eigen::Index c = 0; c < na; ++c) jac(r, c) = ds_dva(bi, angle_buses[static_cast<std::size_t>(c)]).real();
            for (Eigen::Index c = 0; c < nm; ++c) jac(r, na + c) = ds_dvm(bi, magnitude_buses[static_cast<std::size_t>(c)]).real();
        }
        for (Eigen::Index r = 0; r < nm; ++r) {
            const auto bi = magnitude_buses[static_cast<std::size_t>(r)];
            for (Eigen::Index c = 0; c < na; ++c) jac(na + r, c) = ds_dva(bi, angle_buses[static_cast<std::size_t>(c)]).imag();
            for (Eigen::Index c = 0; c < nm; ++c) jac(na + r, na + c) = ds_dvm(bi, magnitude_buses[static_cast<std::size_t>(c)]).imag();
        }
        Eigen::PartialPivLU<Matrix> lu(jac);
        const Vector dx = lu.solve(-f);
        for (Eigen::Index k = 0; k < na; ++k) va(angle_buses[static_cast<std::size_t>(k)]) += dx(k);
        for (Eigen::Index k = 0; k < nm; ++k) vm(magnitude_buses[static_cast<std::size_t>(k)]) += dx(na + k);
        v = voltage();
        f = mismatch_vector(v);
        norm = f.lpNorm<Eigen::Infinity>();
        ++iteration;
        if (!std::isfinite(norm)) {
            throw ConvergenceError("power flow diverged (non-finite mismatch)", norm, iteration,
                                   std::numeric_limits<double>::quiet_NaN());
        }
    }

    result.voltage = v;
    result.iterations = iteration;
    result.mismatch = norm;

    // Distribute bus injections back onto the generators.
    const Eigen::VectorXcd s_bus = v.array() * (y * v).conjugate().array();
    Eigen::VectorXcd s_load = Eigen::VectorXcd::Zero(n);
    for (const auto& l : grid.loads()) s_load(static_cast<Eigen::Index>(grid.bus_index(l.bus))) += Complex(l.p0, l.q0);
    std::vector<int> gens_at_bus(buses.size(), 0);
    for (const auto& g : grid.generators()) ++gens_at_bus[grid.bus_index(g.bus)];

    const auto ng = static_cast<Eigen::Index>(grid.generators().size());
    result.p_generation.resize(ng);
    result.q_generation.resize(ng);
    std::vector<bool> slack_assigned(buses.size(), false);
    for (Eigen::Index k = 0; k < ng; ++k) {
        const auto& g = grid.generators()[static_cast<std::size_t>(k)];
        const auto i = grid.bus_index(g.bus);
        const auto ii = static_cast<Eigen::Index>(i);
        const Complex s_gen = s_bus(ii) + s_load(ii);
        result.q_generation(k) = s_gen.imag() / gens_at_bus[i];
        if (i == grid.slack_index() && !slack_assigned[i]) {
            double others = 0.0;
            for (const auto& h : grid.generators()) {
                if (&h != &g && grid.bus_index(h.bus) == i) others += h.p_set;
            }
            result.p_generation(k) = s_gen.real() - others;
            slack_assigned[i] = true;
        } else {
            result.p_generation(k) = g.p_set;
        }
    }
    return result;
}

}  // namespace gridcal
