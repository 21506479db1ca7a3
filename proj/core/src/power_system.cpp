// SPDX-License-Identifier: Apache-2.0
#include "gridcal/power_system.hpp"

#include <algorithm>
#include <map>
#include <numeric>

#include "gridcal/error.hpp"

namespace gridcal {

std::size_t StateLayout::index_of(std::string_view name) const {
    for (std::size_t i = 0; i < names.size(); ++i) {
        if (names[i] == name) return i;
    }
    throw ValidationError("unknown state variable '" + std::string(name) + "'");
}

namespace {

std::vector<std::size_t> order_by_bus(std::size_t count, const auto& bus_of) {
    std::vector<std::size_t> order(count);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return bus_of(a) < bus_of(b); });
    return order;
}

std::string device_label(const std::string& prefix, int bus, std::map<int, int>& seen) {
    const int count = seen[bus]++;
    std::string label = prefix + std::to_string(bus);
    if (count > 0) label += "_" + std::to_string(count);
    return label;
}

}  // namespace

PowerSystemModel::PowerSystemModel(GridModel grid, const PowerFlowOptions& options)
    : grid_(std::move(grid)), power_flow_(solve_power_flow(grid_, options)) {
    const auto& generators = grid_.generators();
    const auto& loads = grid_.loads();
    const auto gen_order = order_by_bus(generators.size(), [&](std::size_t k) { return generators[k].bus; });
    const auto load_order = order_by_bus(loads.size(), [&](std::size_t k) { return loads[k].bus; });
    const std::size_t n_bus = grid_.buses().size();

    std::vector<int> device_bus;
    std::map<int, int> seen_gen;
    for (std::size_t k : gen_order) {
        const GeneratorSpec& spec = generators[k];
        const auto bus = static_cast<Eigen::Index>(grid_.bus_index(spec.bus));
        const auto gk = static_cast<Eigen::Index>(k);
        devices_.push_back(std::make_unique<ClassicalMachine>(
            spec, device_label("gen", spec.bus, seen_gen), grid_.base_frequency(), power_flow_.voltage(bus),
            std::complex<double>(power_flow_.p_generation(gk), power_flow_.q_generation(gk))));
        device_bus.push_back(spec.bus);
    }
    std::map<int, int> seen_load;
    for (std::size_t k : load_order) {
        const LoadSpec& spec = loads[k];
        devices_.push_back(
            std::make_unique<MixedLoad>(spec, device_label("load", spec.bus, seen_load), steady_voltage(spec.bus)));
        device_bus.push_back(spec.bus);
    }

    for (const auto& device : devices_) {
        layout_.differential += device->num_states();
        layout_.algebraic += device->num_algebraic();
    }
    layout_.algebraic += 2 * n_bus;

    for (const auto& device : devices_) {
        for (auto& name : device->state_names()) layout_.names.push_back(std::move(name));
    }
    for (const Bus& bus : grid_.buses()) {
        layout_.names.push_back("bus" + std::to_string(bus.id) + ".vr");
        layout_.names.push_back("bus" + std::to_string(bus.id) + ".vi");
    }
    for (const auto& device : devices_) {
        for (auto& name : device->algebraic_names()) layout_.names.push_back(std::move(name));
    }

    z0_ = Vector::Zero(static_cast<Eigen::Index>(layout_.size()));
    for (std::size_t i = 0; i < n_bus; ++i) {
        const auto row = static_cast<Eigen::Index>(layout_.differential + 2 * i);
        z0_(row) = power_flow_.voltage(static_cast<Eigen::Index>(i)).real();
        z0_(row + 1) = power_flow_.voltage(static_cast<Eigen::Index>(i)).imag();
    }
    std::size_t state = 0;
    std::size_t algebraic = layout_.differential + 2 * n_bus;
    for (std::size_t d = 0; d < devices_.size(); ++d) {
        Device& device = *devices_[d];
        const std::size_t vr = voltage_index(device_bus[d]);
        device.bind(DeviceSlots{state, algebraic, vr, vr + 1});
        if (auto* machine = dynamic_cast<ClassicalMachine*>(&device)) {
            const auto o = static_cast<Eigen::Index>(state);
            z0_(o) = machine->initial_angle();
            z0_(o + 1) = 0.0;
            z0_(o + 2) = machine->initial_mechanical_power();
        } else if (auto* load = dynamic_cast<MixedLoad*>(&device)) {
            // At v = v0 the drawn current does not depend on θ.
            const std::complex<double> current =
                load->current(z0_(static_cast<Eigen::Index>(vr)), z0_(static_cast<Eigen::Index>(vr + 1)), 0.0);
            z0_(static_cast<Eigen::Index>(algebraic)) = current.real();
            z0_(static_cast<Eigen::Index>(algebraic + 1)) = current.imag();
        }
        state += device.num_states();
        algebraic += device.num_algebraic();
    }
}

std::size_t PowerSystemModel::voltage_index(int bus_id) const {
    return layout_.differential + 2 * grid_.bus_index(bus_id);
}

double PowerSystemModel::steady_voltage(int bus_id) const {
    return std::abs(power_flow_.voltage(static_cast<Eigen::Index>(grid_.bus_index(bus_id))));
}

SteadyState initialize_steady_state(const PowerSystemModel& model, const Parameters& theta) {
    if (static_cast<std::size_t>(theta.size()) != model.num_parameters()) {
        throw ValidationError("initialize_steady_state: parameter dimension mismatch");
    }
    const auto n = static_cast<Eigen::Index>(model.layout().differential);
    const Vector& z0 = model.initial_state();
    return SteadyState{z0.head(n), z0.tail(z0.size() - n)};
}

namespace {

Matrix real_form(const Eigen::MatrixXcd& y) {
    const Eigen::Index n = y.rows();
    Matrix k(2 * n, 2 * n);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < n; ++j) {
            const double g = y(i, j).real();
            const double b = y(i, j).imag();
            k(2 * i, 2 * j) = g;
            k(2 * i, 2 * j + 1) = -b;
            k(2 * i + 1, 2 * j) = b;
            k(2 * i + 1, 2 * j + 1) = g;
        }
    }
    return k;
}

}  // namespace

PowerSystemDae::PowerSystemDae(const PowerSystemModel& model, const NetworkView& network)
    : model_(model),
      network_(network),
      base_(real_form(network.base_admittance())),
      faulted_(real_form(network.faulted_admittance())) {}

void PowerSystemDae::evaluate(double t, const Vector& z, const Parameters& theta, Vector& h, Matrix* dh_dz,
                              Matrix* dh_dtheta) const {
    const auto size = static_cast<Eigen::Index>(model_.layout().size());
    const auto n = static_cast<Eigen::Index>(model_.layout().differential);
    const Matrix& network = network_.fault_active(t) ? faulted_ : base_;
    const Eigen::Index m = network.rows();

    h.setZero(size);
    // Current balance: device injections minus Y v.
    h.segment(n, m).noalias() = -network * z.segment(n, m);
    if (dh_dz) {
        dh_dz->setZero(size, size);
        dh_dz->block(n, n, m, m) = -network;
    }
    if (dh_dtheta) dh_dtheta->setZero(size, static_cast<Eigen::Index>(model_.num_parameters()));

    StampTarget target{z, theta, h, dh_dz, dh_dtheta};
    for (const auto& device : model_.devices()) device->stamp(target);
}

}  // namespace gridcal
