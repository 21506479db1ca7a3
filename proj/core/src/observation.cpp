// SPDX-License-Identifier: Apache-2.0
#include "gridcal/observation.hpp"

#include <cmath>
#include <limits>
#include <map>

#include <nlohmann/json.hpp>

#include "gridcal/csv.hpp"
#include "gridcal/error.hpp"
#include "gridcal/random.hpp"

namespace gridcal {

using nlohmann::json;

ObservationOperator::ObservationOperator(std::size_t state_size, std::vector<std::size_t> indices,
                                         std::vector<std::string> channels)
    : state_size_(state_size), indices_(std::move(indices)), channels_(std::move(channels)) {
    if (indices_.empty()) throw ValidationError("observation operator selects no channels");
    if (channels_.size() != indices_.size()) {
        throw ValidationError("observation operator: " + std::to_string(channels_.size()) + " channel names for " +
                              std::to_string(indices_.size()) + " indices");
    }
    for (std::size_t c = 0; c < indices_.size(); ++c) {
        if (indices_[c] >= state_size_) {
            throw ValidationError("observation operator: channel '" + channels_[c] + "' selects index " +
                                  std::to_string(indices_[c]) + " of a state of size " + std::to_string(state_size_));
        }
    }
}

ObservationOperator ObservationOperator::bus_voltages(const PowerSystemModel& model, const std::vector<int>& bus_ids) {
    std::vector<int> ids = bus_ids;
    if (ids.empty()) {
        for (const Bus& bus : model.grid().buses()) ids.push_back(bus.id);
    }
    std::vector<std::size_t> indices;
    std::vector<std::string> channels;
    for (int id : ids) {
        if (!model.grid().has_bus(id)) throw ValidationError("observation operator: unknown bus " + std::to_string(id));
        const std::size_t vr = model.voltage_index(id);
        indices.push_back(vr);
        indices.push_back(vr + 1);
        channels.push_back(model.layout().names[vr]);
        channels.push_back(model.layout().names[vr + 1]);
    }
    return ObservationOperator(model.layout().size(), std::move(indices), std::move(channels));
}

ObservationOperator ObservationOperator::load_currents(const PowerSystemModel& model) {
    std::vector<std::string> channels;
    for (const auto& device : model.devices()) {
        if (dynamic_cast<const MixedLoad*>(device.get()) == nullptr) continue;
        for (auto& name : device->algebraic_names()) channels.push_back(std::move(name));
    }
    return from_channels(model, channels);
}

ObservationOperator ObservationOperator::voltages_and_currents(const PowerSystemModel& model) {
    std::vector<std::string> channels = bus_voltages(model).channels();
    const auto currents = load_currents(model).channels();
    channels.insert(channels.end(), currents.begin(), currents.end());
    return from_channels(model, channels);
}

ObservationOperator ObservationOperator::from_channels(const PowerSystemModel& model,
                                                       const std::vector<std::string>& channels) {
    std::vector<std::size_t> indices;
    indices.reserve(channels.size());
    for (const auto& name : channels) indices.push_back(model.layout().index_of(name));
    return ObservationOperator(model.layout().size(), std::move(indices), channels);
}

Vector ObservationOperator::observe(const Vector& z) const {
    if (static_cast<std::size_t>(z.size()) != state_size_) {
        throw ValidationError("observe: state has dimension " + std::to_string(z.size()) + ", operator expects " +
                              std::to_string(state_size_));
    }
    Vector out(static_cast<Eigen::Index>(indices_.size()));
    for (std::size_t c = 0; c < indices_.size(); ++c) out(static_cast<Eigen::Index>(c)) = z(static_cast<Eigen::Index>(indices_[c]));
    return out;
}

Matrix ObservationOperator::apply(const Matrix& s) const {
    if (static_cast<std::size_t>(s.rows()) != state_size_) {
        throw ValidationError("observation operator: matrix has " + std::to_string(s.rows()) + " rows, expected " +
                              std::to_string(state_size_));
    }
    Matrix out(static_cast<Eigen::Index>(indices_.size()), s.cols());
    for (std::size_t c = 0; c < indices_.size(); ++c) out.row(static_cast<Eigen::Index>(c)) = s.row(static_cast<Eigen::Index>(indices_[c]));
    return out;
}

Vector ObservationOperator::adjoint(const Vector& r) const {
    if (static_cast<std::size_t>(r.size()) != indices_.size()) {
        throw ValidationError("observation adjoint: vector has dimension " + std::to_string(r.size()) +
                              ", expected " + std::to_string(indices_.size()));
    }
    Vector out = Vector::Zero(static_cast<Eigen::Index>(state_size_));
    for (std::size_t c = 0; c < indices_.size(); ++c) out(static_cast<Eigen::Index>(indices_[c])) += r(static_cast<Eigen::Index>(c));
    return out;
}

std::vector<Vector> ObservationOperator::observe(const Trajectory& trajectory) const {
    std::vector<Vector> out;
    out.reserve(trajectory.states.size());
    for (const Vector& z : trajectory.states) out.push_back(observe(z));
    return out;
}

void ObservationSet::validate() const {
    if (times.size() != data.size()) {
        throw ValidationError("observations: " + std::to_string(times.size()) + " times but " +
                              std::to_string(data.size()) + " data vectors");
    }
    if (channels.empty()) throw ValidationError("observations: no channels");
    if (static_cast<std::size_t>(noise_variance.size()) != channels.size()) {
        throw ValidationError("observations: noise variance has " + std::to_string(noise_variance.size()) +
                              " entries for " + std::to_string(channels.size()) + " channels");
    }
    for (Eigen::Index c = 0; c < noise_variance.size(); ++c) {
        if (!(noise_variance(c) > 0.0) || !std::isfinite(noise_variance(c))) {
            throw ValidationError("observations: noise variance of channel '" + channels[static_cast<std::size_t>(c)] +
                                  "' must be positive");
        }
    }
    for (std::size_t k = 0; k < data.size(); ++k) {
        if (static_cast<std::size_t>(data[k].size()) != channels.size()) {
            throw ValidationError("observations: data vector " + std::to_string(k) + " has length " +
                                  std::to_string(data[k].size()) + ", expected " + std::to_string(channels.size()));
        }
        if (k > 0 && !(times[k] > times[k - 1])) throw ValidationError("observations: times must be strictly increasing");
    }
}

std::vector<Vector> add_noise(const std::vector<Vector>& truth, const Vector& variance, std::uint64_t seed) {
    std::vector<Vector> out;
    out.reserve(truth.size());
    for (std::size_t k = 0; k < truth.size(); ++k) {
        if (truth[k].size() != variance.size()) throw ValidationError("add_noise: variance length does not match data");
        Rng rng = make_rng(seed, {k});
        NormalSampler normal;
        Vector d = truth[k];
        for (Eigen::Index c = 0; c < d.size(); ++c) d(c) += std::sqrt(variance(c)) * normal(rng);
        out.push_back(std::move(d));
    }
    return out;
}

ObservationSet synthesize_observations(const PowerSystemModel& model, const Parameters& theta_true,
                                       const std::optional<FaultScenario>& scenario, const ObservationOperator& op,
                                       std::span<const double> times, const Vector& noise_variance,
                                       std::uint64_t seed, const SimulationOptions& options) {
    ObservationSet obs;
    obs.times.assign(times.begin(), times.end());
    obs.noise_variance = noise_variance;
    obs.channels = op.channels();
    obs.seed = seed;
    obs.theta_true = theta_true;
    obs.data.resize(times.size(), Vector::Zero(static_cast<Eigen::Index>(op.size())));
    obs.validate();  // R checked before the simulation is paid for

    const Trajectory truth = simulate(model, theta_true, scenario, times, options);
    obs.data = add_noise(op.observe(truth), noise_variance, seed);
    return obs;
}

void write_observations(const std::filesystem::path& csv_path, const std::filesystem::path& sidecar_path,
                        const ObservationSet& obs) {
    obs.validate();
    CsvTable table;
    table.header = {"time", "channel", "value"};
    for (std::size_t k = 0; k < obs.times.size(); ++k) {
        for (std::size_t c = 0; c < obs.channels.size(); ++c) {
            table.rows.push_back({format_number(obs.times[k]), obs.channels[c],
                                  format_number(obs.data[k](static_cast<Eigen::Index>(c)))});
        }
    }
    write_csv(csv_path, table);

    json sidecar;
    sidecar["schema"] = "gridcal-observations/1";
    sidecar["channels"] = obs.channels;
    sidecar["noise_variance"] = std::vector<double>(obs.noise_variance.data(),
                                                    obs.noise_variance.data() + obs.noise_variance.size());
    if (obs.seed) sidecar["seed"] = *obs.seed;
    if (obs.theta_true) {
        sidecar["theta_true"] =
            std::vector<double>(obs.theta_true->data(), obs.theta_true->data() + obs.theta_true->size());
    }
    write_text(sidecar_path, sidecar.dump(2) + "\n");
}

ObservationSet read_observations(const std::filesystem::path& csv_path, const std::filesystem::path& sidecar_path) {
    ObservationSet obs;
    try {
        const json sidecar = json::parse(read_text(sidecar_path));
        obs.channels = sidecar.at("channels").get<std::vector<std::string>>();
        const auto variance = sidecar.at("noise_variance").get<std::vector<double>>();
        obs.noise_variance = Eigen::Map<const Vector>(variance.data(), static_cast<Eigen::Index>(variance.size()));
        if (sidecar.contains("seed")) obs.seed = sidecar["seed"].get<std::uint64_t>();
        if (sidecar.contains("theta_true")) {
            const auto theta = sidecar["theta_true"].get<std::vector<double>>();
            obs.theta_true = Eigen::Map<const Vector>(theta.data(), static_cast<Eigen::Index>(theta.size()));
        }
    } catch (const json::exception& e) {
        throw ParseError(sidecar_path.string() + ": " + e.what());
    }

    std::map<std::string, std::size_t> channel_index;
    for (std::size_t c = 0; c < obs.channels.size(); ++c) channel_index[obs.channels[c]] = c;

    const CsvTable table = read_csv(csv_path);
    if (table.header != std::vector<std::string>{"time", "channel", "value"}) {
        throw ParseError(csv_path.string() + ": expected header time,channel,value");
    }
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const auto& row = table.rows[r];
        const double t = parse_number(row[0]);
        if (obs.times.empty() || obs.times.back() != t) {
            obs.times.push_back(t);
            obs.data.push_back(Vector::Constant(static_cast<Eigen::Index>(obs.channels.size()),
                                                std::numeric_limits<double>::quiet_NaN()));
        }
        const auto it = channel_index.find(row[1]);
        if (it == channel_index.end()) {
            throw ParseError(csv_path.string() + ": row " + std::to_string(r + 2) + " names unknown channel '" +
                             row[1] + "'");
        }
        obs.data.back()(static_cast<Eigen::Index>(it->second)) = parse_number(row[2]);
    }
    for (std::size_t k = 0; k < obs.data.size(); ++k) {
        if (!obs.data[k].allFinite()) {
            throw ParseError(csv_path.string() + ": missing channel value at t=" + format_number(obs.times[k]));
        }
    }
    obs.validate();
    return obs;
}

}  // namespace gridcal
