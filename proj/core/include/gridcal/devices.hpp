// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <complex>
#include <optional>
#include <string>
#include <vector>

#include "gridcal/grid.hpp"
#include "gridcal/linalg.hpp"

namespace gridcal {

/// Global indices a device needs to read its states and its bus voltage.
struct DeviceSlots {
    std::size_t state_offset = 0;      ///< first differential state in z
    std::size_t algebraic_offset = 0;  ///< first device-owned algebraic state in z
    std::size_t vr = 0;            ///< index of the bus real voltage in z (also its current-balance row)
    std::size_t vi = 0;
};

/// Where a device writes: h(t, z; θ) and, when non-null, its Jacobians.
struct StampTarget {
    const Vector& z;
    const Parameters& theta;
    Vector& h;
    Matrix* dh_dz = nullptr;
    Matrix* dh_dtheta = nullptr;
};

/// A device attached to one bus. Differential right-hand sides go to rows
/// [state_offset, state_offset + num_states()), device algebraic equations to
/// [algebraic_offset, algebraic_offset + num_algebraic()); the injected current is
/// added to the bus current-balance rows (vr, vi).
class Device {
public:
    virtual ~Device() = default;

    virtual std::size_t num_states() const = 0;
    virtual std::size_t num_algebraic() const { return 0; }
    virtual std::vector<std::string> state_names() const = 0;
    virtual std::vector<std::string> algebraic_names() const { return {}; }
    virtual void stamp(StampTarget& target) const = 0;

    const DeviceSlots& slots() const noexcept { return slots_; }
    void bind(const DeviceSlots& slots) noexcept { slots_ = slots; }

private:
    DeviceSlots slots_;
};

/// Constant EMF behind transient reactance, swing equation, first-order governor.
/// States: rotor angle (rad), speed deviation (pu), mechanical power (pu).
class ClassicalMachine final : public Device {
public:
    ClassicalMachine(const GeneratorSpec& spec, std::string label, double base_frequency,
                     std::complex<double> terminal_voltage, std::complex<double> power);

    std::size_t num_states() const override { return 3; }
    std::vector<std::string> state_names() const override;
    void stamp(StampTarget& target) const override;

    /// Equilibrium values implied by the power-flow operating point.
    double initial_angle() const noexcept { return delta0_; }
    double initial_mechanical_power() const noexcept { return pref_; }
    double internal_emf() const noexcept { return emf_; }

private:
    GeneratorSpec spec_;
    std::string label_;
    double omega_base_;
    double emf_ = 0.0;
    double delta0_ = 0.0;
    double pref_ = 0.0;
};

/// Voltage magnitude (pu) below which the constant-power limb of a load stops
/// holding its power.
inline constexpr double kConstantPowerBreakVoltage = 0.7;

/// Constant-impedance / constant-power load mixture. The drawn current phasor
/// (ir, ii) is an algebraic state so that it can be measured.
class MixedLoad final : public Device {
public:
    MixedLoad(const LoadSpec& spec, std::string label, double v0);

    std::size_t num_states() const override { return 0; }
    std::size_t num_algebraic() const override { return 2; }
    std::vector<std::string> state_names() const override { return {}; }
    std::vector<std::string> algebraic_names() const override;
    void stamp(StampTarget& target) const override;

    double v0() const noexcept { return v0_; }
    /// Current drawn at bus voltage (vr, vi) for mixture θ.
    std::complex<double> current(double vr, double vi, double theta) const;
    double theta_of(const Parameters& theta) const;

private:
    LoadSpec spec_;
    std::string label_;
    double v0_;
};

}  // namespace gridcal
