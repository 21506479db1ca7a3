// SPDX-License-Identifier: Apache-2.0
#include "gridcal/experiments.hpp"

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <ctime>
#include <set>

#include <nlohmann/json.hpp>

#include "gridcal/csv.hpp"
#include "gridcal/error.hpp"
#include "gridcal/random.hpp"

namespace gridcal {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr std::uint64_t kObservationStream = 1;
constexpr std::uint64_t kConeStream = 2;

json default_config() {
    return json{
        {"version", std::string(kVersion)},
        {"grid", nullptr},
        {"seed", nullptr},
        {"output", "gridcal-run"},
        {"jobs", 0},
        {"scenario", {{"bus", nullptr}, {"impedance", 0.01}, {"t_fault", 0.05}, {"t_clear", nullptr}}},
        {"contingencies", {{"buses", json::array()}, {"impedances", {0.01, 0.03, 0.1, 0.5, 1.0}}, {"t_fault", 0.05}}},
        {"prior", {{"mean", 0.5}, {"variance", 0.01}, {"lower", 0.0}, {"upper", 1.0}}},
        {"truth", 0.9},
        {"noise", {{"sigma", 0.01}}},
        {"observation", {{"channels", "voltages+currents"}, {"offset", 0.0}, {"rate", 30.0}, {"count", 30}}},
        {"optimizer", {{"max_iters", 30}, {"pgtol", 1e-5}, {"memory", 10}, {"line_search_max_trials", 20}}},
        {"simulation",
         {{"refinement", 4}, {"newton_tol", 1e-8}, {"newton_max_iters", 20}, {"newton_max_halvings", 8},
          {"newton_min_rcond", 1e-14}}},
        {"uq", {{"n_ensemble", 200}, {"lambdas", {0.0, 0.001, 0.005}}, {"box_sigmas", 2.0}, {"cone_space", "observation"}}},
        {"tlm", {{"timing_calls", 20}, {"refresh_max_outer", 10}, {"refresh_tol", 1e-6}}},
    };
}

// Rejects keys absent from the defaults so typos surface instead of being ignored.
void check_known_keys(const json& given, const json& defaults, const std::string& prefix) {
    for (const auto& [key, value] : given.items()) {
        const std::string path = prefix.empty() ? key : prefix + "." + key;
        if (!defaults.contains(key)) throw ValidationError("config: unknown key '" + path + "'");
        if (value.is_object() && defaults[key].is_object()) check_known_keys(value, defaults[key], path);
    }
}

void merge_into(json& target, const json& source) {
    for (const auto& [key, value] : source.items()) {
        if (value.is_object() && target[key].is_object()) {
            merge_into(target[key], value);
        } else {
            target[key] = value;
        }
    }
}

void apply_override(json& config, const std::string& text) {
    const auto eq = text.find('=');
    if (eq == std::string::npos || eq == 0) {
        throw ValidationError("config override '" + text + "': expected dotted.path=value");
    }
    std::string path = text.substr(0, eq);
    while (!path.empty() && path.front() == '-') path.erase(path.begin());
    const std::string raw = text.substr(eq + 1);

    json* node = &config;
    std::size_t start = 0;
    while (true) {
        const auto dot = path.find('.', start);
        const std::string key = path.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
        if (!node->is_object() || !node->contains(key)) {
            throw ValidationError("config override: unknown key '" + path + "'");
        }
        node = &(*node)[key];
        if (dot == std::string::npos) break;
        start = dot + 1;
    }
    json value = json::parse(raw, nullptr, false);
    if (value.is_discarded()) value = raw;
    *node = std::move(value);
}

template <typename T>
T get_field(const json& config, const std::string& path) {
    const json* node = &config;
    std::size_t start = 0;
    while (true) {
        const auto dot = path.find('.', start);
        node = &node->at(path.substr(start, dot == std::string::npos ? std::string::npos : dot - start));
        if (dot == std::string::npos) break;
        start = dot + 1;
    }
    try {
        return node->get<T>();
    } catch (const json::exception&) {
        throw ValidationError("config: field '" + path + "' has the wrong type (" + node->dump() + ")");
    }
}

void require(bool ok, const std::string& path, const std::string& what) {
    if (!ok) throw ValidationError("config: " + path + " " + what);
}

bool finite_positive(double x) { return std::isfinite(x) && x > 0.0; }

RunConfig from_json(const json& j, const fs::path& base_dir) {
    RunConfig c;
    require(j.at("grid").is_string(), "grid", "is required");
    require(j.at("seed").is_number_unsigned() || j.at("seed").is_number_integer(), "seed", "is required");
    require(j.at("scenario").at("bus").is_number_integer(), "scenario.bus", "is required");
    require(get_field<std::string>(j, "version") == kVersion, "version",
            "must be " + std::string(kVersion) + ", got " + j.at("version").dump());

    c.grid_path = fs::path(get_field<std::string>(j, "grid"));
    if (c.grid_path.is_relative()) c.grid_path = base_dir / c.grid_path;
    c.grid_path = c.grid_path.lexically_normal();
    require(fs::exists(c.grid_path), "grid", "file does not exist: " + c.grid_path.string());
    require(j.at("seed").is_number_unsigned() || j.at("seed").get<std::int64_t>() >= 0, "seed", "must be >= 0");
    c.seed = get_field<std::uint64_t>(j, "seed");
    c.output = fs::path(get_field<std::string>(j, "output"));
    c.jobs = get_field<int>(j, "jobs");
    require(c.jobs >= 0, "jobs", "must be >= 0");

    c.scenario.bus = get_field<int>(j, "scenario.bus");
    c.scenario.impedance = get_field<double>(j, "scenario.impedance");
    c.scenario.t_fault = get_field<double>(j, "scenario.t_fault");
    if (!j.at("scenario").at("t_clear").is_null()) c.scenario.t_clear = get_field<double>(j, "scenario.t_clear");
    require(finite_positive(c.scenario.impedance), "scenario.impedance", "must be > 0");
    require(c.scenario.t_fault >= 0.0, "scenario.t_fault", "must be >= 0");

    c.contingency_buses = get_field<std::vector<int>>(j, "contingencies.buses");
    c.contingency_impedances = get_field<std::vector<double>>(j, "contingencies.impedances");
    c.fault_time = get_field<double>(j, "contingencies.t_fault");
    for (double z : c.contingency_impedances) require(finite_positive(z), "contingencies.impedances", "must be > 0");
    require(c.fault_time >= 0.0, "contingencies.t_fault", "must be >= 0");

    c.prior_mean = get_field<double>(j, "prior.mean");
    c.prior_variance = get_field<double>(j, "prior.variance");
    c.lower = get_field<double>(j, "prior.lower");
    c.upper = get_field<double>(j, "prior.upper");
    require(finite_positive(c.prior_variance), "prior.variance", "must be > 0");
    require(c.lower < c.upper, "prior.lower", "must be < prior.upper");
    require(c.prior_mean >= c.lower && c.prior_mean <= c.upper, "prior.mean", "must lie in [lower, upper]");
    c.truth = get_field<double>(j, "truth");
    require(c.truth >= c.lower && c.truth <= c.upper, "truth", "must lie in [prior.lower, prior.upper]");
    c.noise_sigma = get_field<double>(j, "noise.sigma");
    require(finite_positive(c.noise_sigma), "noise.sigma", "must be > 0");

    c.channels = get_field<std::string>(j, "observation.channels");
    require(c.channels == "voltages+currents" || c.channels == "voltages", "observation.channels",
            "must be \"voltages+currents\" or \"voltages\"");
    c.schedule.offset = get_field<double>(j, "observation.offset");
    c.schedule.rate = get_field<double>(j, "observation.rate");
    c.schedule.count = get_field<std::size_t>(j, "observation.count");
    require(c.schedule.offset >= 0.0, "observation.offset", "must be >= 0");
    require(finite_positive(c.schedule.rate), "observation.rate", "must be > 0");
    require(c.schedule.count >= 1, "observation.count", "must be >= 1");

    c.optimizer.max_iters = get_field<int>(j, "optimizer.max_iters");
    c.optimizer.pgtol = get_field<double>(j, "optimizer.pgtol");
    c.optimizer.memory = get_field<int>(j, "optimizer.memory");
    c.optimizer.line_search_max_trials = get_field<int>(j, "optimizer.line_search_max_trials");
    try {
        c.optimizer.validate();
    } catch (const ValidationError& e) {
        throw ValidationError(std::string("config: optimizer: ") + e.what());
    }

    c.simulation.refinement = get_field<int>(j, "simulation.refinement");
    c.simulation.newton.tolerance = get_field<double>(j, "simulation.newton_tol");
    c.simulation.newton.max_iterations = get_field<int>(j, "simulation.newton_max_iters");
    c.simulation.newton.max_halvings = get_field<int>(j, "simulation.newton_max_halvings");
    c.simulation.newton.min_rcond = get_field<double>(j, "simulation.newton_min_rcond");
    require(c.simulation.refinement >= 1, "simulation.refinement", "must be >= 1");
    require(finite_positive(c.simulation.newton.tolerance), "simulation.newton_tol", "must be > 0");
    require(c.simulation.newton.max_iterations >= 1, "simulation.newton_max_iters", "must be >= 1");
    require(c.simulation.newton.max_halvings >= 0, "simulation.newton_max_halvings", "must be >= 0");

    c.n_ensemble = get_field<std::size_t>(j, "uq.n_ensemble");
    c.lambdas = get_field<std::vector<double>>(j, "uq.lambdas");
    c.box_sigmas = get_field<double>(j, "uq.box_sigmas");
    c.cone_space = get_field<std::string>(j, "uq.cone_space");
    require(c.n_ensemble >= 2, "uq.n_ensemble", "must be >= 2");
    require(!c.lambdas.empty(), "uq.lambdas", "must not be empty");
    for (double l : c.lambdas) require(l >= 0.0 && std::isfinite(l), "uq.lambdas", "entries must be >= 0");
    require(finite_positive(c.box_sigmas), "uq.box_sigmas", "must be > 0");
    require(c.cone_space == "observation" || c.cone_space == "state", "uq.cone_space",
            "must be \"observation\" or \"state\"");

    c.timing_calls = get_field<int>(j, "tlm.timing_calls");
    c.refresh_max_outer = get_field<int>(j, "tlm.refresh_max_outer");
    c.refresh_tol = get_field<double>(j, "tlm.refresh_tol");
    require(c.timing_calls >= 0, "tlm.timing_calls", "must be >= 0");
    require(c.refresh_max_outer >= 1, "tlm.refresh_max_outer", "must be >= 1");
    require(finite_positive(c.refresh_tol), "tlm.refresh_tol", "must be > 0");

    std::set<std::pair<int, double>> seen;
    for (const ContingencyConfig& cc : c.contingencies()) {
        require(seen.emplace(cc.bus, cc.impedance).second, "contingencies",
                "repeat the scenario " + cc.id());
    }
    return c;
}

std::vector<double> to_std(const Vector& v) { return {v.data(), v.data() + v.size()}; }

std::uint64_t bits(double x) { return std::bit_cast<std::uint64_t>(x); }

std::uint64_t contingency_key(const ContingencyConfig& c) {
    return derive_seed(static_cast<std::uint64_t>(c.bus), {bits(c.impedance), bits(c.t_fault)});
}

std::uint64_t observation_seed(const RunConfig& config, const ContingencyConfig& c) {
    return derive_seed(config.seed, {kObservationStream, contingency_key(c)});
}

// Shared across λ so inflated cones differ from the base one only by the added spread.
std::uint64_t cone_seed(const RunConfig& config, const ContingencyConfig& cal, const ContingencyConfig& pred) {
    return derive_seed(config.seed, {kConeStream, contingency_key(cal), contingency_key(pred)});
}

ObservationOperator make_operator(const PowerSystemModel& model, const std::string& channels) {
    if (channels == "voltages") return ObservationOperator::bus_voltages(model);
    return ObservationOperator::voltages_and_currents(model);
}

std::vector<double> rmse_series(const std::vector<Vector>& x, const std::vector<Vector>& truth) {
    if (x.size() != truth.size()) throw ValidationError("rmse series: instant counts differ");
    std::vector<double> out;
    out.reserve(x.size());
    for (std::size_t k = 0; k < x.size(); ++k) out.push_back(rmse(x[k], truth[k]));
    return out;
}

double mean_of(const std::vector<double>& v) {
    if (v.empty()) return 0.0;
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

double median_seconds(std::vector<double> samples) {
    if (samples.empty()) return 0.0;
    std::sort(samples.begin(), samples.end());
    const std::size_t n = samples.size();
    return n % 2 ? samples[n / 2] : 0.5 * (samples[n / 2 - 1] + samples[n / 2]);
}

template <typename Fn>
double time_median(int calls, Fn&& fn) {
    std::vector<double> samples;
    for (int i = 0; i < calls; ++i) {
        const auto start = std::chrono::steady_clock::now();
        fn();
        samples.push_back(std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count());
    }
    return median_seconds(std::move(samples));
}

ConeOptions cone_options(const RunConfig& config) {
    ConeOptions options;
    options.sampling.box_sigmas = config.box_sigmas;
    options.sampling.jobs = config.jobs;
    return options;
}

UncertaintyCone observation_cone(const Experiment& exp, const PosteriorApprox& post, const ContingencyConfig& cal,
                                 const ContingencyConfig& pred) {
    const std::optional<FaultScenario> scenario = exp.scenario(pred);
    const EnsembleMap map = [&](const Parameters& theta) {
        return exp.observation_operator().observe(
            simulate(exp.model(), theta, scenario, exp.times(), exp.config().simulation));
    };
    return uncertainty_cones(post, map, exp.times(), exp.observation_operator().channels(), exp.config().n_ensemble,
                             cone_seed(exp.config(), cal, pred), cone_options(exp.config()));
}

UncertaintyCone state_cone(const Experiment& exp, const PosteriorApprox& post, const ContingencyConfig& c) {
    const std::optional<FaultScenario> scenario = exp.scenario(c);
    const EnsembleMap map = [&](const Parameters& theta) {
        return simulate(exp.model(), theta, scenario, exp.times(), exp.config().simulation).states;
    };
    return uncertainty_cones(post, map, exp.times(), exp.model().layout().names, exp.config().n_ensemble,
                             cone_seed(exp.config(), c, c), cone_options(exp.config()));
}

void write_series_csv(const fs::path& path, const std::vector<double>& times,
                      const std::vector<std::pair<std::string, const std::vector<double>*>>& columns) {
    CsvTable table;
    table.header.push_back("time");
    for (const auto& [name, values] : columns) {
        if (values->size() != times.size()) throw ValidationError("series table: column '" + name + "' has wrong length");
        table.header.push_back(name);
    }
    for (std::size_t k = 0; k < times.size(); ++k) {
        std::vector<std::string> row{format_number(times[k])};
        for (const auto& column : columns) row.push_back(format_number((*column.second)[k]));
        table.rows.push_back(std::move(row));
    }
    write_csv(path, table);
}

void write_long_csv(const fs::path& path, const std::vector<double>& times, const std::vector<std::string>& channels,
                    const std::vector<Vector>& values) {
    CsvTable table;
    table.header = {"time", "channel", "value"};
    for (std::size_t k = 0; k < times.size(); ++k) {
        for (std::size_t c = 0; c < channels.size(); ++c) {
            table.rows.push_back(
                {format_number(times[k]), channels[c], format_number(values[k](static_cast<Eigen::Index>(c)))});
        }
    }
    write_csv(path, table);
}

std::string lambda_tag(double lambda) { return "lambda" + format_number(lambda); }

json contingency_json(const ContingencyConfig& c, double base_frequency) {
    const FaultScenario s = c.resolve(base_frequency);
    return json{{"id", c.id()},
                {"bus", c.bus},
                {"impedance", c.impedance},
                {"t_fault", s.t_fault},
                {"t_clear", s.t_clear}};
}

std::string utc_timestamp() {
    const std::time_t now = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buffer[32];
    std::strftime(buffer, sizeof(buffer), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buffer;
}

}  // namespace

std::vector<double> ScheduleConfig::times() const {
    std::vector<double> out;
    out.reserve(count);
    for (std::size_t k = 1; k <= count; ++k) out.push_back(offset + static_cast<double>(k) / rate);
    return out;
}

FaultScenario ContingencyConfig::resolve(double base_frequency) const {
    FaultScenario s = FaultScenario::two_cycle(bus, impedance, t_fault, base_frequency);
    if (t_clear) s.t_clear = *t_clear;
    s.validate();
    return s;
}

std::string ContingencyConfig::id() const { return "bus" + std::to_string(bus) + "-z" + format_number(impedance); }

std::vector<ContingencyConfig> RunConfig::contingencies() const {
    std::vector<ContingencyConfig> out;
    for (int bus : contingency_buses) {
        for (double z : contingency_impedances) out.push_back(ContingencyConfig{bus, z, fault_time, std::nullopt});
    }
    return out;
}

std::string RunConfig::frozen_json() const {
    json scenario_json{{"bus", scenario.bus}, {"impedance", scenario.impedance}, {"t_fault", scenario.t_fault}};
    scenario_json["t_clear"] = scenario.t_clear ? json(*scenario.t_clear) : json(nullptr);
    json j{
        {"version", std::string(kVersion)},
        {"grid", fs::absolute(grid_path).lexically_normal().string()},
        {"seed", seed},
        {"scenario", scenario_json},
        {"contingencies", {{"buses", contingency_buses}, {"impedances", contingency_impedances}, {"t_fault", fault_time}}},
        {"prior", {{"mean", prior_mean}, {"variance", prior_variance}, {"lower", lower}, {"upper", upper}}},
        {"truth", truth},
        {"noise", {{"sigma", noise_sigma}}},
        {"observation",
         {{"channels", channels}, {"offset", schedule.offset}, {"rate", schedule.rate}, {"count", schedule.count}}},
        {"optimizer",
         {{"max_iters", optimizer.max_iters},
          {"pgtol", optimizer.pgtol},
          {"memory", optimizer.memory},
          {"line_search_max_trials", optimizer.line_search_max_trials}}},
        {"simulation",
         {{"refinement", simulation.refinement},
          {"newton_tol", simulation.newton.tolerance},
          {"newton_max_iters", simulation.newton.max_iterations},
          {"newton_max_halvings", simulation.newton.max_halvings},
          {"newton_min_rcond", simulation.newton.min_rcond}}},
        {"uq", {{"n_ensemble", n_ensemble}, {"lambdas", lambdas}, {"box_sigmas", box_sigmas}, {"cone_space", cone_space}}},
        {"tlm", {{"timing_calls", timing_calls}, {"refresh_max_outer", refresh_max_outer}, {"refresh_tol", refresh_tol}}},
    };
    return j.dump(2) + "\n";
}

RunConfig parse_run_config(std::string_view json_text, const fs::path& base_dir,
                           const std::vector<std::string>& overrides) {
    json given = json::parse(json_text, nullptr, false);
    if (given.is_discarded() || !given.is_object()) throw ParseError("config: not a JSON object");
    json config = default_config();
    check_known_keys(given, config, "");
    merge_into(config, given);
    for (const std::string& o : overrides) apply_override(config, o);
    try {
        return from_json(config, base_dir);
    } catch (const json::exception& e) {
        throw ValidationError(std::string("config: ") + e.what());
    }
}

RunConfig load_run_config(const fs::path& path, const std::vector<std::string>& overrides) {
    if (!fs::exists(path)) throw ValidationError("config file does not exist: " + path.string());
    return parse_run_config(read_text(path), path.parent_path(), overrides);
}

double rmse(const Vector& x, const Vector& x_true) {
    if (x.size() != x_true.size()) {
        throw ValidationError("rmse: lengths differ (" + std::to_string(x.size()) + " vs " +
                              std::to_string(x_true.size()) + ")");
    }
    if (x.size() == 0) throw ValidationError("rmse: empty vectors");
    return std::sqrt((x - x_true).squaredNorm() / static_cast<double>(x.size()));
}

double coverage(const std::vector<Vector>& truth, const UncertaintyCone& cone) {
    if (truth.size() != cone.mean.size() || truth.size() != cone.sigma.size() || truth.empty()) {
        throw ValidationError("coverage: truth has " + std::to_string(truth.size()) + " instants, cone has " +
                              std::to_string(cone.mean.size()));
    }
    std::size_t inside = 0;
    std::size_t total = 0;
    for (std::size_t k = 0; k < truth.size(); ++k) {
        if (truth[k].size() != cone.mean[k].size() || truth[k].size() != cone.sigma[k].size()) {
            throw ValidationError("coverage: channel count differs at instant " + std::to_string(k));
        }
        for (Eigen::Index c = 0; c < truth[k].size(); ++c) {
            if (std::abs(truth[k](c) - cone.mean[k](c)) <= 2.0 * cone.sigma[k](c)) ++inside;
            ++total;
        }
    }
    return 100.0 * static_cast<double>(inside) / static_cast<double>(total);
}

Experiment::Experiment(RunConfig config)
    : config_(std::move(config)),
      model_(load_grid(config_.grid_path)),
      op_(make_operator(model_, config_.channels)),
      times_(config_.schedule.times()),
      prior_(TruncatedGaussian::isotropic(model_.num_parameters(), config_.prior_mean, config_.prior_variance,
                                          config_.lower, config_.upper)),
      theta_true_(Parameters::Constant(static_cast<Eigen::Index>(model_.num_parameters()), config_.truth)) {
    for (const ContingencyConfig& c : config_.contingencies()) {
        if (!model_.grid().has_bus(c.bus)) {
            throw ValidationError("config: contingencies.buses names bus " + std::to_string(c.bus) +
                                  ", absent from the grid");
        }
    }
    if (!model_.grid().has_bus(config_.scenario.bus)) {
        throw ValidationError("config: scenario.bus " + std::to_string(config_.scenario.bus) + " is absent from the grid");
    }
}

Vector Experiment::noise_variance() const {
    return Vector::Constant(static_cast<Eigen::Index>(op_.size()), config_.noise_sigma * config_.noise_sigma);
}

FaultScenario Experiment::scenario(const ContingencyConfig& c) const {
    return c.resolve(model_.grid().base_frequency());
}

PowerSystemForward Experiment::forward(const ContingencyConfig& c) const {
    return PowerSystemForward(model_, scenario(c), op_, times_, config_.simulation);
}

std::vector<Vector> Experiment::predict_observations(const ContingencyConfig& c, const Parameters& theta) const {
    return op_.observe(simulate(model_, theta, scenario(c), times_, config_.simulation));
}

ObservationSet Experiment::synthesize(const ContingencyConfig& c) const {
    return synthesize_observations(model_, theta_true_, scenario(c), op_, times_, noise_variance(),
                                   observation_seed(config_, c), config_.simulation);
}

InversionExperiment run_inversion_experiment(const Experiment& experiment, const ContingencyConfig& contingency) {
    InversionExperiment out;
    out.contingency = contingency;
    out.observations = experiment.synthesize(contingency);
    out.truth = experiment.predict_observations(contingency, experiment.theta_true());
    const PowerSystemForward forward = experiment.forward(contingency);
    out.inversion = solve_map(out.observations, experiment.prior(), forward, experiment.config().optimizer);
    out.posterior = build_posterior(out.inversion.theta_map, out.observations, experiment.prior(), forward);
    out.cone = experiment.config().cone_space == "state"
                   ? state_cone(experiment, out.posterior, contingency)
                   : observation_cone(experiment, out.posterior, contingency, contingency);
    out.rmse_prior = rmse_series(experiment.predict_observations(contingency, experiment.prior().mean()), out.truth);
    out.rmse_map = rmse_series(experiment.predict_observations(contingency, out.inversion.theta_map), out.truth);
    return out;
}

double PredictionReport::mean_coverage(double lambda) const {
    double sum = 0.0;
    std::size_t n = 0;
    for (const PredictionCell& cell : cells) {
        if (cell.lambda == lambda) {
            sum += cell.coverage;
            ++n;
        }
    }
    if (n == 0) throw ValidationError("prediction report: no cells at λ = " + format_number(lambda));
    return sum / static_cast<double>(n);
}

PredictionReport run_prediction_matrix(const Experiment& experiment, const std::vector<ContingencyConfig>& contingencies,
                                       const std::vector<std::size_t>& calibrations) {
    if (contingencies.size() < 2) throw ValidationError("prediction matrix: need at least two contingencies");
    PredictionReport report;
    report.contingencies = contingencies;
    report.lambdas = experiment.config().lambdas;
    std::vector<std::size_t> rows = calibrations;
    if (rows.empty()) {
        for (std::size_t i = 0; i < contingencies.size(); ++i) rows.push_back(i);
    }
    for (std::size_t row : rows) {
        if (row >= contingencies.size()) throw ValidationError("prediction matrix: calibration index out of range");
    }

    std::vector<std::vector<Vector>> truths(contingencies.size());
    for (std::size_t p = 0; p < contingencies.size(); ++p) {
        truths[p] = experiment.predict_observations(contingencies[p], experiment.theta_true());
    }

    for (std::size_t row : rows) {
        const ContingencyConfig& cal = contingencies[row];
        try {
            InversionExperiment inv;
            inv.contingency = cal;
            inv.observations = experiment.synthesize(cal);
            inv.truth = truths[row];
            const PowerSystemForward forward = experiment.forward(cal);
            inv.inversion = solve_map(inv.observations, experiment.prior(), forward, experiment.config().optimizer);
            inv.posterior = build_posterior(inv.inversion.theta_map, inv.observations, experiment.prior(), forward);
            inv.rmse_prior = rmse_series(experiment.predict_observations(cal, experiment.prior().mean()), inv.truth);
            inv.rmse_map = rmse_series(experiment.predict_observations(cal, inv.inversion.theta_map), inv.truth);

            std::vector<PredictionCell> row_cells;
            for (std::size_t p = 0; p < contingencies.size(); ++p) {
                for (double lambda : report.lambdas) {
                    PredictionCell cell;
                    cell.calibration = row;
                    cell.prediction = p;
                    cell.lambda = lambda;
                    cell.cone = observation_cone(experiment, inflate(inv.posterior, lambda), cal, contingencies[p]);
                    cell.rmse = rmse_series(cell.cone.mean, truths[p]);
                    cell.mean_rmse = mean_of(cell.rmse);
                    cell.coverage = coverage(truths[p], cell.cone);
                    cell.coverage_error = 100.0 - cell.coverage;
                    if (p == row && lambda == 0.0) inv.cone = cell.cone;
                    row_cells.push_back(std::move(cell));
                }
            }
            if (inv.cone.times.empty()) inv.cone = row_cells[row * report.lambdas.size()].cone;
            report.calibrations.push_back(row);
            report.inversions.push_back(std::move(inv));
            for (PredictionCell& cell : row_cells) report.cells.push_back(std::move(cell));
        } catch (const NumericalError& e) {
            report.complete = false;
            report.failures.push_back(cal.id() + ": " + e.what());
        }
    }
    return report;
}

const TlmModeResult& TlmComparison::mode(std::string_view name) const {
    for (const TlmModeResult& m : modes) {
        if (m.mode == name) return m;
    }
    throw ValidationError("TLM comparison has no mode '" + std::string(name) + "'");
}

TlmComparison run_tlm_comparison(const Experiment& experiment, const ContingencyConfig& contingency,
                                 int timing_calls) {
    const RunConfig& config = experiment.config();
    const TruncatedGaussian& prior = experiment.prior();
    const Parameters& theta_pr = prior.mean();
    const ObservationSet obs = experiment.synthesize(contingency);
    const std::vector<Vector> truth = experiment.predict_observations(contingency, experiment.theta_true());
    const PowerSystemForward full = experiment.forward(contingency);

    TlmComparison out;
    out.contingency = contingency;
    out.times = experiment.times();
    const auto finish = [&](TlmModeResult& m) {
        m.parameter_error = (m.theta_map - experiment.theta_true()).norm();
        m.rmse = rmse_series(experiment.predict_observations(contingency, m.theta_map), truth);
    };

    {
        TlmModeResult m;
        m.mode = "full";
        const InversionResult r = solve_map(obs, prior, full, config.optimizer);
        m.theta_map = r.theta_map;
        m.iterations = r.iterations;
        finish(m);
        m.objective_seconds = time_median(timing_calls, [&] { evaluate_objective(theta_pr, obs, prior, full, false); });
        m.gradient_seconds = time_median(timing_calls, [&] { evaluate_objective(theta_pr, obs, prior, full, true); });
        out.modes.push_back(std::move(m));
    }
    for (const auto& [name, reference] :
         {std::pair<std::string, Parameters>{"tlm-at-truth", experiment.theta_true()},
          std::pair<std::string, Parameters>{"tlm-at-prior", theta_pr}}) {
        TlmModeResult m;
        m.mode = name;
        const LinearizedForward surrogate = LinearizedForward::around(full, reference);
        const InversionResult r = solve_map(obs, prior, surrogate, config.optimizer);
        m.theta_map = r.theta_map;
        m.iterations = r.iterations;
        finish(m);
        m.objective_seconds =
            time_median(timing_calls, [&] { evaluate_objective(theta_pr, obs, prior, surrogate, false); });
        m.gradient_seconds = time_median(timing_calls, [&] { evaluate_objective(theta_pr, obs, prior, surrogate, true); });
        m.linearization_seconds = time_median(timing_calls, [&] { LinearizedForward::around(full, reference); });
        out.modes.push_back(std::move(m));
    }
    {
        // Base trajectory stays at θ_pr; the sensitivities are re-linearized at each outer iterate.
        TlmModeResult m;
        m.mode = "tlm-refreshed";
        const std::vector<Vector> base = full.evaluate(theta_pr, false).predictions;
        Parameters theta = theta_pr;
        for (int outer = 0; outer < config.refresh_max_outer; ++outer) {
            ForwardEvaluation reference{base, full.evaluate(theta, true).jacobians};
            const LinearizedForward surrogate(theta_pr, std::move(reference));
            const InversionResult r = solve_map(obs, prior, surrogate, config.optimizer, theta);
            m.iterations += r.iterations;
            m.outer_iterations = outer + 1;
            const double step = (r.theta_map - theta).lpNorm<Eigen::Infinity>();
            theta = r.theta_map;
            if (step < config.refresh_tol) break;
        }
        m.theta_map = theta;
        finish(m);
        const LinearizedForward surrogate(theta_pr, ForwardEvaluation{base, full.evaluate(theta, true).jacobians});
        m.objective_seconds =
            time_median(timing_calls, [&] { evaluate_objective(theta_pr, obs, prior, surrogate, false); });
        // A refreshed gradient re-linearizes before evaluating the surrogate.
        m.gradient_seconds = time_median(timing_calls, [&] {
            const LinearizedForward fresh(theta_pr, ForwardEvaluation{base, full.evaluate(theta_pr, true).jacobians});
            evaluate_objective(theta_pr, obs, prior, fresh, true);
        });
        m.linearization_seconds = time_median(timing_calls, [&] { full.evaluate(theta_pr, true); });
        out.modes.push_back(std::move(m));
    }
    return out;
}

void write_config(const fs::path& dir, const RunConfig& config) {
    fs::create_directories(dir);
    write_text(dir / "config.json", config.frozen_json());
}

void write_metadata(const fs::path& dir, const std::string& command, const std::string& extra_json) {
    fs::create_directories(dir);
    json j{{"command", command}, {"version", std::string(kVersion)}, {"finished_utc", utc_timestamp()}};
    if (!extra_json.empty()) {
        const json extra = json::parse(extra_json);
        for (const auto& [key, value] : extra.items()) j[key] = value;
    }
    write_text(dir / "metadata.json", j.dump(2) + "\n");
}

void write_simulation(const fs::path& dir, const Experiment& experiment, const ContingencyConfig& c) {
    std::vector<double> times{0.0};
    times.insert(times.end(), experiment.times().begin(), experiment.times().end());
    const Trajectory traj =
        simulate(experiment.model(), experiment.theta_true(), experiment.scenario(c), times, experiment.config().simulation);
    const fs::path out = dir / "simulation" / c.id();
    fs::create_directories(out);
    CsvTable table;
    table.header.push_back("time");
    for (const std::string& name : experiment.model().layout().names) table.header.push_back(name);
    for (std::size_t k = 0; k < traj.times.size(); ++k) {
        std::vector<std::string> row{format_number(traj.times[k])};
        for (Eigen::Index i = 0; i < traj.states[k].size(); ++i) row.push_back(format_number(traj.states[k](i)));
        table.rows.push_back(std::move(row));
    }
    write_csv(out / "trajectory.csv", table);
    const FaultScenario snapped =
        snap_to_grid(experiment.scenario(c), build_time_grid(times, experiment.config().simulation.refinement).points);
    json meta{{"contingency", contingency_json(c, experiment.model().grid().base_frequency())},
              {"theta", to_std(experiment.theta_true())},
              {"snapped_t_fault", snapped.t_fault},
              {"snapped_t_clear", snapped.t_clear}};
    write_text(out / "simulation.json", meta.dump(2) + "\n");
}

void write_observation_artifacts(const fs::path& dir, const Experiment& experiment, const ContingencyConfig& c,
                                 const ObservationSet& obs, const std::vector<Vector>& truth) {
    const fs::path out = dir / "obs" / c.id();
    fs::create_directories(out);
    write_observations(out / "observations.csv", out / "observations.json", obs);
    write_long_csv(out / "truth.csv", experiment.times(), experiment.observation_operator().channels(), truth);
}

void write_inversion_experiment(const fs::path& dir, const Experiment& experiment, const InversionExperiment& result) {
    const ContingencyConfig& c = result.contingency;
    write_observation_artifacts(dir, experiment, c, result.observations, result.truth);

    const fs::path inv = dir / "inversion" / c.id();
    fs::create_directories(inv);
    json j = json::parse(inversion_result_to_json(result.inversion));
    j["contingency"] = contingency_json(c, experiment.model().grid().base_frequency());
    j["theta_true"] = to_std(experiment.theta_true());
    j["parameter_error_l2"] = (result.inversion.theta_map - experiment.theta_true()).norm();
    j["parameter_error_linf"] = (result.inversion.theta_map - experiment.theta_true()).lpNorm<Eigen::Infinity>();
    j["mean_rmse_prior"] = mean_of(result.rmse_prior);
    j["mean_rmse_map"] = mean_of(result.rmse_map);
    write_text(inv / "result.json", j.dump(2) + "\n");
    write_series_csv(inv / "rmse.csv", experiment.times(), {{"prior", &result.rmse_prior}, {"map", &result.rmse_map}});

    const fs::path post = dir / "posterior" / c.id();
    fs::create_directories(post);
    json pj = json::parse(posterior_to_json(result.posterior));
    pj["theta_true"] = to_std(experiment.theta_true());
    pj["prior_mean"] = to_std(experiment.prior().mean());
    pj["cone_space"] = experiment.config().cone_space;
    pj["n_ensemble"] = result.cone.n_ensemble;
    pj["failed_samples"] = result.cone.failed_samples;
    write_text(post / "posterior.json", pj.dump(2) + "\n");
    write_factor_csv(post / "L.csv", result.posterior);
    write_cone_csv(post / "cone.csv", result.cone);
}

void write_prediction_report(const fs::path& dir, const Experiment& experiment, const PredictionReport& report) {
    for (const InversionExperiment& inv : report.inversions) write_inversion_experiment(dir, experiment, inv);

    const fs::path root = dir / "predictions";
    fs::create_directories(root);
    CsvTable summary;
    summary.header = {"calibration", "prediction", "lambda", "mean_rmse", "coverage", "coverage_error"};
    for (const PredictionCell& cell : report.cells) {
        const ContingencyConfig& cal = report.contingencies[cell.calibration];
        const ContingencyConfig& pred = report.contingencies[cell.prediction];
        const fs::path out = root / cal.id() / pred.id();
        fs::create_directories(out);
        write_cone_csv(out / ("cone-" + lambda_tag(cell.lambda) + ".csv"), cell.cone);
        write_series_csv(out / ("rmse-" + lambda_tag(cell.lambda) + ".csv"), cell.cone.times, {{"rmse", &cell.rmse}});
        summary.rows.push_back({cal.id(), pred.id(), format_number(cell.lambda), format_number(cell.mean_rmse),
                                format_number(cell.coverage), format_number(cell.coverage_error)});
    }
    write_csv(root / "summary.csv", summary);

    json status{{"complete", report.complete}, {"failures", report.failures}, {"lambdas", report.lambdas}};
    json list = json::array();
    for (const ContingencyConfig& c : report.contingencies) {
        list.push_back(contingency_json(c, experiment.model().grid().base_frequency()));
    }
    status["contingencies"] = list;
    json calibrated = json::array();
    for (std::size_t row : report.calibrations) calibrated.push_back(report.contingencies[row].id());
    status["calibrated"] = calibrated;
    json coverage_by_lambda = json::object();
    if (!report.cells.empty()) {
        for (double lambda : report.lambdas) coverage_by_lambda[format_number(lambda)] = report.mean_coverage(lambda);
    }
    status["mean_coverage"] = coverage_by_lambda;
    write_text(root / "status.json", status.dump(2) + "\n");
}

void write_tlm_comparison(const fs::path& dir, const TlmComparison& comparison) {
    const fs::path out = dir / "tlm";
    fs::create_directories(out);
    json modes = json::array();
    std::vector<std::pair<std::string, const std::vector<double>*>> columns;
    for (const TlmModeResult& m : comparison.modes) {
        modes.push_back({{"mode", m.mode},
                         {"theta_map", to_std(m.theta_map)},
                         {"parameter_error", m.parameter_error},
                         {"mean_rmse", mean_of(m.rmse)},
                         {"iterations", m.iterations},
                         {"outer_iterations", m.outer_iterations}});
        columns.emplace_back(m.mode, &m.rmse);
    }
    json j{{"contingency", comparison.contingency.id()}, {"modes", modes}};
    write_text(out / "comparison.json", j.dump(2) + "\n");
    write_series_csv(out / "rmse.csv", comparison.times, columns);
}

std::string tlm_timings_json(const TlmComparison& comparison) {
    json modes = json::object();
    for (const TlmModeResult& m : comparison.modes) {
        modes[m.mode] = {{"objective_seconds", m.objective_seconds},
                         {"gradient_seconds", m.gradient_seconds},
                         {"linearization_seconds", m.linearization_seconds}};
    }
    return json{{"tlm_timings", modes}}.dump();
}

void write_failure_record(const fs::path& dir, const std::string& command, const std::string& kind,
                          const std::string& message) {
    fs::create_directories(dir);
    json j{{"command", command}, {"kind", kind}, {"message", message}};
    write_text(dir / "failure.json", j.dump(2) + "\n");
}

}  // namespace gridcal
