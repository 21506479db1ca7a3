// SPDX-License-Identifier: Apache-2.0
#include "gridcal/grid.hpp"

#include <algorithm>
#include <cmath>

#include <nlohmann/json.hpp>

#include "gridcal/csv.hpp"
#include "gridcal/error.hpp"

namespace gridcal {

using nlohmann::json;

FaultScenario FaultScenario::two_cycle(int bus, double impedance, double t_fault,
                                       double base_frequency) {
    return FaultScenario{bus, impedance, t_fault, t_fault + 2.0 / base_frequency};
}

void FaultScenario::validate() const {
    if (!(fault_impedance > 0.0) || !std::isfinite(fault_impedance)) {
        throw ValidationError("fault at bus " + std::to_string(bus) +
                              ": fault_impedance must be > 0, got " + format_number(fault_impedance));
    }
    if (!(t_fault >= 0.0) || !(t_fault < t_clear)) {
        throw ValidationError("fault at bus " + std::to_string(bus) +
                              ": need 0 <= t_fault < t_clear, got t_fault=" + format_number(t_fault) +
                              " t_clear=" + format_number(t_clear));
    }
}

GridModel::GridModel(std::string name, double base_frequency, double base_mva,
                     std::vector<Bus> buses, std::vector<Branch> branches,
                     std::vector<GeneratorSpec> generators, std::vector<LoadSpec> loads)
    : name_(std::move(name)),
      base_frequency_(base_frequency),
      base_mva_(base_mva),
      buses_(std::move(buses)),
      branches_(std::move(branches)),
      generators_(std::move(generators)),
      loads_(std::move(loads)) {
    if (!(base_frequency_ > 0.0)) throw ValidationError("base_frequency must be > 0");
    if (buses_.empty()) throw ValidationError("grid has no buses");

    std::sort(buses_.begin(), buses_.end(), [](const Bus& a, const Bus& b) { return a.id < b.id; });
    int slack_count = 0;
    for (std::size_t i = 0; i < buses_.size(); ++i) {
        const Bus& bus = buses_[i];
        if (!bus_index_.emplace(bus.id, i).second) {
            throw ValidationError("buses: duplicate bus id " + std::to_string(bus.id));
        }
        if (!(bus.v0 > 0.0)) {
            throw ValidationError("bus " + std::to_string(bus.id) + ": v0 must be > 0, got " +
                                  format_number(bus.v0));
        }
        if (bus.slack) {
            ++slack_count;
            slack_index_ = i;
        }
    }
    if (slack_count != 1) {
        throw ValidationError("exactly one slack bus required, found " + std::to_string(slack_count));
    }

    for (std::size_t k = 0; k < branches_.size(); ++k) {
        const Branch& br = branches_[k];
        const std::string where = "branches[" + std::to_string(k) + "]";
        for (int end : {br.from, br.to}) {
            if (!has_bus(end)) {
                throw ValidationError(where + ": references bus " + std::to_string(end) +
                                      " which does not exist");
            }
        }
        if (br.from == br.to) throw ValidationError(where + ": from and to bus are identical");
        if (!std::isfinite(std::abs(br.series_admittance)) || std::abs(br.series_admittance) == 0.0) {
            throw ValidationError(where + ": series impedance must be finite and nonzero");
        }
    }

    bool slack_has_generator = false;
    for (std::size_t k = 0; k < generators_.size(); ++k) {
        const GeneratorSpec& g = generators_[k];
        const std::string where = "generators[" + std::to_string(k) + "]";
        if (!has_bus(g.bus)) {
            throw ValidationError(where + ": references bus " + std::to_string(g.bus) +
                                  " which does not exist");
        }
        if (!(g.inertia > 0.0)) throw ValidationError(where + ": inertia h must be > 0");
        if (!(g.damping >= 0.0)) throw ValidationError(where + ": damping d must be >= 0");
        if (!(g.transient_reactance > 0.0)) throw ValidationError(where + ": xd_prime must be > 0");
        if (!(g.droop > 0.0)) throw ValidationError(where + ": droop must be > 0");
        if (!(g.governor_time_constant > 0.0)) throw ValidationError(where + ": tg must be > 0");
        if (bus_index(g.bus) == slack_index_) slack_has_generator = true;
    }
    if (!slack_has_generator) throw ValidationError("slack bus has no generator");

    int max_index = -1;
    for (std::size_t k = 0; k < loads_.size(); ++k) {
        const LoadSpec& load = loads_[k];
        const std::string where = "loads[" + std::to_string(k) + "]";
        if (!has_bus(load.bus)) {
            throw ValidationError(where + ": references bus " + std::to_string(load.bus) +
                                  " which does not exist");
        }
        if (load.theta_index) {
            if (*load.theta_index < 0) throw ValidationError(where + ": theta_index must be >= 0");
            max_index = std::max(max_index, *load.theta_index);
        } else if (!(load.theta_fixed >= 0.0 && load.theta_fixed <= 1.0)) {
            throw ValidationError(where + ": theta_fixed must lie in [0,1]");
        }
    }
    num_parameters_ = static_cast<std::size_t>(max_index + 1);
    std::vector<bool> referenced(num_parameters_, false);
    for (const auto& load : loads_) {
        if (load.theta_index) referenced[static_cast<std::size_t>(*load.theta_index)] = true;
    }
    for (std::size_t i = 0; i < num_parameters_; ++i) {
        if (!referenced[i]) {
            throw ValidationError("theta_index " + std::to_string(i) + " is not referenced by any load");
        }
    }
}

std::size_t GridModel::bus_index(int id) const {
    auto it = bus_index_.find(id);
    if (it == bus_index_.end()) throw ValidationError("unknown bus id " + std::to_string(id));
    return it->second;
}

namespace {

template <typename T>
T get_required(const json& object, const char* key, const std::string& where) {
    if (!object.is_object() || !object.contains(key)) {
        throw ParseError(where + ": missing required key '" + key + "'");
    }
    try {
        return object.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ParseError(where + "." + key + ": " + e.what());
    }
}

template <typename T>
T get_optional(const json& object, const char* key, T fallback, const std::string& where) {
    if (!object.contains(key)) return fallback;
    return get_required<T>(object, key, where);
}

const json& get_array(const json& root, const char* key) {
    if (!root.contains(key) || !root.at(key).is_array()) {
        throw ParseError(std::string("missing array '") + key + "'");
    }
    return root.at(key);
}

}  // namespace

GridModel parse_grid(std::string_view json_text, std::string_view source) {
    json root;
    try {
        root = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw ParseError(std::string(source) + ": " + e.what());
    }
    try {
        const std::string schema = get_required<std::string>(root, "schema", "grid");
        if (schema != kGridSchema) {
            throw ParseError("unsupported grid schema '" + schema + "', expected '" +
                             std::string(kGridSchema) + "'");
        }

        std::vector<Bus> buses;
        const json& bus_array = get_array(root, "buses");
        for (std::size_t k = 0; k < bus_array.size(); ++k) {
            const json& b = bus_array[k];
            const std::string where = "buses[" + std::to_string(k) + "]";
            buses.push_back(Bus{get_required<int>(b, "id", where),
                                get_optional<double>(b, "base_kv", 1.0, where),
                                get_optional<double>(b, "v0", 1.0, where),
                                get_optional<double>(b, "angle0", 0.0, where),
                                get_optional<bool>(b, "slack", false, where)});
        }

        std::vector<Branch> branches;
        const json& branch_array = get_array(root, "branches");
        for (std::size_t k = 0; k < branch_array.size(); ++k) {
            const json& b = branch_array[k];
            const std::string where = "branches[" + std::to_string(k) + "]";
            const std::complex<double> z(get_optional<double>(b, "r", 0.0, where),
                                         get_required<double>(b, "x", where));
            if (std::abs(z) == 0.0) throw ValidationError(where + ": zero series impedance");
            branches.push_back(Branch{get_required<int>(b, "from", where),
                                      get_required<int>(b, "to", where), 1.0 / z,
                                      {get_optional<double>(b, "g", 0.0, where),
                                       get_optional<double>(b, "b", 0.0, where)},
                                      z});
        }

        std::vector<GeneratorSpec> generators;
        const json& gen_array = get_array(root, "generators");
        for (std::size_t k = 0; k < gen_array.size(); ++k) {
            const json& g = gen_array[k];
            const std::string where = "generators[" + std::to_string(k) + "]";
            generators.push_back(GeneratorSpec{get_required<int>(g, "bus", where),
                                               get_optional<double>(g, "p", 0.0, where),
                                               get_required<double>(g, "h", where),
                                               get_optional<double>(g, "d", 0.0, where),
                                               get_required<double>(g, "xd_prime", where),
                                               get_optional<double>(g, "droop", 0.05, where),
                                               get_optional<double>(g, "tg", 0.5, where)});
        }

        std::vector<LoadSpec> loads;
        const json& load_array = get_array(root, "loads");
        for (std::size_t k = 0; k < load_array.size(); ++k) {
            const json& l = load_array[k];
            const std::string where = "loads[" + std::to_string(k) + "]";
            LoadSpec load;
            load.bus = get_required<int>(l, "bus", where);
            load.p0 = get_required<double>(l, "p0", where);
            load.q0 = get_optional<double>(l, "q0", 0.0, where);
            const bool has_index = l.contains("theta_index");
            const bool has_fixed = l.contains("theta_fixed");
            if (has_index == has_fixed) {
                throw ParseError(where + ": exactly one of 'theta_index' or 'theta_fixed' is required");
            }
            if (has_index) load.theta_index = get_required<int>(l, "theta_index", where);
            if (has_fixed) load.theta_fixed = get_required<double>(l, "theta_fixed", where);
            loads.push_back(load);
        }

        return GridModel(get_optional<std::string>(root, "name", "grid", "grid"),
                         get_required<double>(root, "base_frequency", "grid"),
                         get_optional<double>(root, "base_mva", 100.0, "grid"), std::move(buses),
                         std::move(branches), std::move(generators), std::move(loads));
    } catch (const ValidationError& e) {
        throw ValidationError(std::string(source) + ": " + e.what());
    } catch (const ParseError& e) {
        throw ParseError(std::string(source) + ": " + e.what());
    }
}

GridModel load_grid(const std::filesystem::path& path) {
    return parse_grid(read_text(path), path.string());
}

std::string grid_to_json(const GridModel& grid) {
    json root;
    root["schema"] = kGridSchema;
    root["name"] = grid.name();
    root["base_frequency"] = grid.base_frequency();
    root["base_mva"] = grid.base_mva();
    root["buses"] = json::array();
    for (const auto& b : grid.buses()) {
        json entry = {{"id", b.id}, {"base_kv", b.base_kv}, {"v0", b.v0}, {"angle0", b.angle0}};
        if (b.slack) entry["slack"] = true;
        root["buses"].push_back(entry);
    }
    root["branches"] = json::array();
    for (const auto& br : grid.branches()) {
        const std::complex<double> z =
            br.series_impedance != 0.0 ? br.series_impedance : 1.0 / br.series_admittance;
        root["branches"].push_back({{"from", br.from},
                                    {"to", br.to},
                                    {"r", z.real()},
                                    {"x", z.imag()},
                                    {"g", br.shunt_admittance.real()},
                                    {"b", br.shunt_admittance.imag()}});
    }
    root["generators"] = json::array();
    for (const auto& g : grid.generators()) {
        root["generators"].push_back({{"bus", g.bus},
                                      {"p", g.p_set},
                                      {"h", g.inertia},
                                      {"d", g.damping},
                                      {"xd_prime", g.transient_reactance},
                                      {"droop", g.droop},
                                      {"tg", g.governor_time_constant}});
    }
    root["loads"] = json::array();
    for (const auto& l : grid.loads()) {
        json entry = {{"bus", l.bus}, {"p0", l.p0}, {"q0", l.q0}};
        if (l.theta_index) {
            entry["theta_index"] = *l.theta_index;
        } else {
            entry["theta_fixed"] = l.theta_fixed;
        }
        root["loads"].push_back(entry);
    }
    return root.dump(2) + "\n";
}

LoadPower load_injection(double theta_i, double v, double v0, double p0, double q0) {
    const double ratio2 = (v / v0) * (v / v0);
    return {theta_i * ratio2 * p0 + (1.0 - theta_i) * p0, theta_i * ratio2 * q0 + (1.0 - theta_i) * q0};
}

}  // namespace gridcal
