// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <complex>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace gridcal {

inline constexpr std::string_view kGridSchema = "gridcal-grid/1";

struct Bus {
    int id = 0;
    double base_kv = 1.0;
    double v0 = 1.0;      ///< steady-state voltage magnitude (setpoint at generator buses)
    double angle0 = 0.0;  ///< steady-state angle in radians (initial guess away from the slack)
    bool slack = false;
};

struct Branch {
    int from = 0;
    int to = 0;
    std::complex<double> series_admittance;
    std::complex<double> shunt_admittance;  ///< total line charging, split evenly between ends
    std::complex<double> series_impedance;  ///< as read; kept so serialization round-trips exactly
};

/// Classical machine behind transient reactance with a first-order governor.
struct GeneratorSpec {
    int bus = 0;
    double p_set = 0.0;  ///< dispatch; ignored at the slack bus
    double inertia = 1.0;
    double damping = 0.0;
    double transient_reactance = 0.1;
    double droop = 0.05;
    double governor_time_constant = 0.5;
};

struct LoadSpec {
    int bus = 0;
    double p0 = 0.0;
    double q0 = 0.0;
    std::optional<int> theta_index;  ///< calibrated mixture fraction
    double theta_fixed = 0.0;        ///< used when theta_index is empty
};

/// Three-phase-to-ground fault through a resistive shunt.
struct FaultScenario {
    int bus = 0;
    double fault_impedance = 0.01;
    double t_fault = 0.0;
    double t_clear = 0.0;

    /// Scenario cleared after two cycles of the base frequency.
    static FaultScenario two_cycle(int bus, double impedance, double t_fault, double base_frequency);

    /// Throws ValidationError on a broken invariant.
    void validate() const;

    bool operator==(const FaultScenario&) const = default;
};

/// Static network description. Immutable once constructed; construction validates.
class GridModel {
public:
    GridModel(std::string name, double base_frequency, double base_mva, std::vector<Bus> buses,
              std::vector<Branch> branches, std::vector<GeneratorSpec> generators,
              std::vector<LoadSpec> loads);

    const std::string& name() const noexcept { return name_; }
    double base_frequency() const noexcept { return base_frequency_; }
    double base_mva() const noexcept { return base_mva_; }
    const std::vector<Bus>& buses() const noexcept { return buses_; }
    const std::vector<Branch>& branches() const noexcept { return branches_; }
    const std::vector<GeneratorSpec>& generators() const noexcept { return generators_; }
    const std::vector<LoadSpec>& loads() const noexcept { return loads_; }

    /// Number of calibrated load parameters.
    std::size_t num_parameters() const noexcept { return num_parameters_; }

    bool has_bus(int id) const { return bus_index_.count(id) != 0; }
    /// Position of a bus id in buses(); buses are kept sorted by id.
    std::size_t bus_index(int id) const;
    std::size_t slack_index() const noexcept { return slack_index_; }

private:
    std::string name_;
    double base_frequency_;
    double base_mva_;
    std::vector<Bus> buses_;
    std::vector<Branch> branches_;
    std::vector<GeneratorSpec> generators_;
    std::vector<LoadSpec> loads_;
    std::unordered_map<int, std::size_t> bus_index_;
    std::size_t num_parameters_ = 0;
    std::size_t slack_index_ = 0;
};

GridModel load_grid(const std::filesystem::path& path);
GridModel parse_grid(std::string_view json_text, std::string_view source = "<memory>");
std::string grid_to_json(const GridModel& grid);

struct LoadPower {
    double p;
    double q;
};

/// Constant-impedance / constant-power mixture: theta_i weights the impedance limb.
LoadPower load_injection(double theta_i, double v, double v0, double p0, double q0);

}  // namespace gridcal
