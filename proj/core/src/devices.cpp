// SPDX-License-Identifier: Apache-2.0
#include "gridcal/devices.hpp"

#include <cmath>
#include <numbers>

namespace gridcal {

ClassicalMachine::ClassicalMachine(const GeneratorSpec& spec, std::string label, double base_frequency,
                                   std::complex<double> terminal_voltage, std::complex<double> power)
    : spec_(spec), label_(std::move(label)), omega_base_(2.0 * std::numbers::pi * base_frequency) {
    const std::complex<double> current = std::conj(power / terminal_voltage);
    const std::complex<double> emf =
        terminal_voltage + std::complex<double>(0.0, spec.transient_reactance) * current;
    emf_ = std::abs(emf);
    delta0_ = std::arg(emf);
    pref_ = power.real();
}

std::vector<std::string> ClassicalMachine::state_names() const {
    const std::string prefix = label_ + ".";
    return {prefix + "delta", prefix + "omega", prefix + "pm"};
}

void ClassicalMachine::stamp(StampTarget& t) const {
    const auto o = static_cast<Eigen::Index>(slots().state_offset);
    const auto r = static_cast<Eigen::Index>(slots().vr);
    const auto i = static_cast<Eigen::Index>(slots().vi);
    const double delta = t.z(o);
    const double omega = t.z(o + 1);
    const double pm = t.z(o + 2);
    const double vr = t.z(r);
    const double vi = t.z(i);

    const double x = spec_.transient_reactance;
    const double two_h = 2.0 * spec_.inertia;
    const double er = emf_ * std::cos(delta);
    const double ei = emf_ * std::sin(delta);
    const double pe = (ei * vr - er * vi) / x;

    t.h(o) += omega_base_ * omega;
    t.h(o + 1) += (pm - pe - spec_.damping * omega) / two_h;
    t.h(o + 2) += (pref_ - pm - omega / spec_.droop) / spec_.governor_time_constant;
    t.h(r) += (ei - vi) / x;
    t.h(i) += (vr - er) / x;

    if (!t.dh_dz) return;
    Matrix& jac = *t.dh_dz;
    jac(o, o + 1) += omega_base_;

    const double dpe_ddelta = (er * vr + ei * vi) / x;
    jac(o + 1, o) += -dpe_ddelta / two_h;
    jac(o + 1, o + 1) += -spec_.damping / two_h;
    jac(o + 1, o + 2) += 1.0 / two_h;
    jac(o + 1, r) += -(ei / x) / two_h;
    jac(o + 1, i) += (er / x) / two_h;

    jac(o + 2, o + 1) += -1.0 / (spec_.droop * spec_.governor_time_constant);
    jac(o + 2, o + 2) += -1.0 / spec_.governor_time_constant;

    jac(r, o) += er / x;
    jac(r, i) += -1.0 / x;
    jac(i, o) += ei / x;
    jac(i, r) += 1.0 / x;
}

MixedLoad::MixedLoad(const LoadSpec& spec, std::string label, double v0)
    : spec_(spec), label_(std::move(label)), v0_(v0) {}

std::vector<std::string> MixedLoad::algebraic_names() const { return {label_ + ".ir", label_ + ".ii"}; }

double MixedLoad::theta_of(const Parameters& theta) const {
    return spec_.theta_index ? theta(static_cast<Eigen::Index>(*spec_.theta_index)) : spec_.theta_fixed;
}

namespace {

struct LoadWeight {
    double w_pq;       ///< constant-power limb weight, 1/|V|^2 above the break voltage
    double dw_pq_dv2;
};

// Below the break voltage the constant-power limb continues as a C1 linear
// extension in |V|^2 so the current vanishes with the voltage.
LoadWeight constant_power_weight(double v2) {
    const double v2_break = kConstantPowerBreakVoltage * kConstantPowerBreakVoltage;
    if (v2 >= v2_break) return {1.0 / v2, -1.0 / (v2 * v2)};
    return {2.0 / v2_break - v2 / (v2_break * v2_break), -1.0 / (v2_break * v2_break)};
}

}  // namespace

std::complex<double> MixedLoad::current(double vr, double vi, double theta) const {
    const LoadWeight lw = constant_power_weight(vr * vr + vi * vi);
    const double w = theta / (v0_ * v0_) + (1.0 - theta) * lw.w_pq;
    // conj(S / V) with S = p + jq from the mixture law.
    return {(spec_.p0 * vr + spec_.q0 * vi) * w, (spec_.p0 * vi - spec_.q0 * vr) * w};
}

void MixedLoad::stamp(StampTarget& t) const {
    const auto r = static_cast<Eigen::Index>(slots().vr);
    const auto i = static_cast<Eigen::Index>(slots().vi);
    const auto cr = static_cast<Eigen::Index>(slots().algebraic_offset);
    const auto ci = cr + 1;
    const double vr = t.z(r);
    const double vi = t.z(i);
    const double theta = theta_of(t.theta);

    const double p0 = spec_.p0;
    const double q0 = spec_.q0;
    const double inv_v02 = 1.0 / (v0_ * v0_);
    const LoadWeight lw = constant_power_weight(vr * vr + vi * vi);
    const double a = p0 * vr + q0 * vi;
    const double b = p0 * vi - q0 * vr;
    const double w = theta * inv_v02 + (1.0 - theta) * lw.w_pq;

    // Bus balance loses the drawn current; the device rows pin it to the load law.
    t.h(r) -= t.z(cr);
    t.h(i) -= t.z(ci);
    t.h(cr) += a * w - t.z(cr);
    t.h(ci) += b * w - t.z(ci);

    if (t.dh_dz) {
        Matrix& jac = *t.dh_dz;
        jac(r, cr) -= 1.0;
        jac(i, ci) -= 1.0;
        jac(cr, cr) -= 1.0;
        jac(ci, ci) -= 1.0;
        const double dw_dvr = (1.0 - theta) * lw.dw_pq_dv2 * 2.0 * vr;
        const double dw_dvi = (1.0 - theta) * lw.dw_pq_dv2 * 2.0 * vi;
        jac(cr, r) += p0 * w + a * dw_dvr;
        jac(cr, i) += q0 * w + a * dw_dvi;
        jac(ci, r) += -q0 * w + b * dw_dvr;
        jac(ci, i) += p0 * w + b * dw_dvi;
    }
    if (t.dh_dtheta && spec_.theta_index) {
        const auto k = static_cast<Eigen::Index>(*spec_.theta_index);
        const double dw_dtheta = inv_v02 - lw.w_pq;
        (*t.dh_dtheta)(cr, k) += a * dw_dtheta;
        (*t.dh_dtheta)(ci, k) += b * dw_dtheta;
    }
}

}  // namespace gridcal
