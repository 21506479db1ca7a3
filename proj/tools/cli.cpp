// SPDX-License-Identifier: Apache-2.0
#include "cli.hpp"

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <map>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "gridcal/csv.hpp"
#include "gridcal/error.hpp"
#include "gridcal/experiments.hpp"
#include "gridcal/parallel.hpp"

namespace gridcal::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct UsageError : Error {
    using Error::Error;
};

struct Invocation {
    std::string command;
    std::string config_path;
    std::string output;
    int jobs = -1;
    std::vector<std::string> overrides;
};

struct Outcome {
    json summary;
    json metadata = json::object();
};

std::vector<double> to_std(const Vector& v) { return {v.data(), v.data() + v.size()}; }

// CLI11 hands unknown flags back verbatim; accept "--a.b=v" and "--a.b v".
std::vector<std::string> collect_overrides(const std::vector<std::string>& extras) {
    std::vector<std::string> out;
    for (std::size_t i = 0; i < extras.size(); ++i) {
        const std::string& arg = extras[i];
        if (arg.rfind("--", 0) != 0 || arg.size() < 3) throw UsageError("unexpected argument '" + arg + "'");
        const std::string body = arg.substr(2);
        if (body.find('.') == std::string::npos && body.find('=') == std::string::npos &&
            (i + 1 >= extras.size() || extras[i + 1].rfind("--", 0) == 0)) {
            throw UsageError("unknown flag '" + arg + "'");
        }
        if (body.find('=') != std::string::npos) {
            out.push_back(body);
        } else if (i + 1 < extras.size()) {
            out.push_back(body + "=" + extras[++i]);
        } else {
            throw UsageError("flag '" + arg + "' needs a value");
        }
    }
    return out;
}

int resolve_job_count(int flag, const RunConfig& config) {
    if (flag >= 0) return flag;
    if (const char* env = std::getenv("GRIDCAL_JOBS"); env && *env) {
        try {
            std::size_t used = 0;
            const int jobs = std::stoi(env, &used);
            if (used == std::string(env).size() && jobs >= 0) return jobs;
        } catch (const std::exception&) {
        }
        throw UsageError("GRIDCAL_JOBS must be a non-negative integer, got '" + std::string(env) + "'");
    }
    return config.jobs;
}

class Logger {
public:
    explicit Logger(std::ostream& err) : err_(err) {}
    void operator()(const std::string& message) const { err_ << "gridcal: " << message << '\n'; }

private:
    std::ostream& err_;
};

json theta_summary(const Parameters& theta) { return to_std(theta); }

json mean_coverage_json(const PredictionReport& report) {
    json j = json::object();
    if (report.cells.empty()) return j;
    for (double lambda : report.lambdas) j[format_number(lambda)] = report.mean_coverage(lambda);
    return j;
}

Outcome cmd_simulate(const Experiment& exp, const fs::path& dir, const Logger& log) {
    const ContingencyConfig& c = exp.config().scenario;
    log("simulating " + c.id() + " at θ_true");
    write_simulation(dir, exp, c);
    return {json{{"scenario", c.id()},
                 {"states", exp.model().layout().size()},
                 {"times", exp.times().size() + 1},
                 {"trajectory", (dir / "simulation" / c.id() / "trajectory.csv").string()}}};
}

Outcome cmd_synthesize(const Experiment& exp, const fs::path& dir, const Logger& log) {
    const ContingencyConfig& c = exp.config().scenario;
    log("synthesizing observations for " + c.id());
    const ObservationSet obs = exp.synthesize(c);
    write_observation_artifacts(dir, exp, c, obs, exp.predict_observations(c, exp.theta_true()));
    return {json{{"scenario", c.id()},
                 {"channels", obs.num_channels()},
                 {"times", obs.times.size()},
                 {"seed", obs.seed.value_or(0)}}};
}

Outcome cmd_calibrate(const Experiment& exp, const fs::path& dir, const Logger& log) {
    const ContingencyConfig& c = exp.config().scenario;
    log("calibrating on " + c.id());
    const InversionExperiment result = run_inversion_experiment(exp, c);
    write_inversion_experiment(dir, exp, result);
    log("MAP after " + std::to_string(result.inversion.iterations) + " iterations (" + result.inversion.termination +
        ")");
    return {json{{"scenario", c.id()},
                 {"theta_map", theta_summary(result.inversion.theta_map)},
                 {"final_pgnorm", result.inversion.final_pgnorm},
                 {"iterations", result.inversion.iterations},
                 {"converged", result.inversion.converged},
                 {"termination", result.inversion.termination},
                 {"parameter_error", (result.inversion.theta_map - exp.theta_true()).norm()},
                 {"failed_samples", result.cone.failed_samples}}};
}

Outcome prediction_outcome(const Experiment& exp, const PredictionReport& report, const fs::path& dir) {
    write_prediction_report(dir, exp, report);
    Outcome o{json{{"contingencies", report.contingencies.size()},
                   {"calibrated", report.calibrations.size()},
                   {"cells", report.cells.size()},
                   {"complete", report.complete},
                   {"mean_coverage", mean_coverage_json(report)}}};
    if (!report.failures.empty()) o.summary["failures"] = report.failures;
    return o;
}

Outcome cmd_predict(const Experiment& exp, const fs::path& dir, const Logger& log) {
    std::vector<ContingencyConfig> list = exp.config().contingencies();
    const ContingencyConfig& cal = exp.config().scenario;
    std::size_t row = list.size();
    for (std::size_t i = 0; i < list.size(); ++i) {
        if (list[i].bus == cal.bus && list[i].impedance == cal.impedance && list[i].t_fault == cal.t_fault &&
            list[i].t_clear == cal.t_clear) {
            row = i;
        }
    }
    if (row == list.size()) list.insert(list.begin(), cal), row = 0;
    log("calibrating on " + cal.id() + ", predicting " + std::to_string(list.size()) + " contingencies");
    return prediction_outcome(exp, run_prediction_matrix(exp, list, {row}), dir);
}

Outcome cmd_sweep(const Experiment& exp, const fs::path& dir, const Logger& log) {
    const std::vector<ContingencyConfig> list = exp.config().contingencies();
    log("sweeping " + std::to_string(list.size()) + " x " + std::to_string(list.size()) + " contingency pairs");
    return prediction_outcome(exp, run_prediction_matrix(exp, list), dir);
}

Outcome cmd_tlm_compare(const Experiment& exp, const fs::path& dir, const Logger& log) {
    const ContingencyConfig& c = exp.config().scenario;
    log("comparing full and linearized calibration on " + c.id());
    const TlmComparison cmp = run_tlm_comparison(exp, c, exp.config().timing_calls);
    write_tlm_comparison(dir, cmp);
    json errors = json::object();
    for (const TlmModeResult& m : cmp.modes) errors[m.mode] = m.parameter_error;
    Outcome o{json{{"scenario", c.id()}, {"parameter_error", errors}}};
    o.metadata = json::parse(tlm_timings_json(cmp));
    return o;
}

const std::map<std::string, std::function<Outcome(const Experiment&, const fs::path&, const Logger&)>>& commands() {
    static const std::map<std::string, std::function<Outcome(const Experiment&, const fs::path&, const Logger&)>> table{
        {"simulate", cmd_simulate}, {"synthesize", cmd_synthesize}, {"calibrate", cmd_calibrate},
        {"predict", cmd_predict},   {"sweep", cmd_sweep},           {"tlm-compare", cmd_tlm_compare},
    };
    return table;
}

void print_summary(std::ostream& out, const std::string& command, const std::string& status, json body) {
    json line{{"command", command}, {"status", status}};
    for (auto& [key, value] : body.items()) line[key] = value;
    out << line.dump() << '\n';
}

int execute(const Invocation& inv, std::ostream& out, std::ostream& err) {
    const Logger log(err);
    RunConfig config = load_run_config(inv.config_path, inv.overrides);
    if (!inv.output.empty()) config.output = inv.output;
    config.jobs = resolve_job_count(inv.jobs, config);
    const fs::path dir = config.output;

    if (inv.command == "report") {
        const std::vector<fs::path> files = emit_report(dir);
        log("wrote " + std::to_string(files.size()) + " report files");
        json list = json::array();
        for (const fs::path& f : files) list.push_back(fs::relative(f, dir).string());
        print_summary(out, inv.command, "ok", json{{"output", dir.string()}, {"files", list}});
        return kExitOk;
    }

    const auto start = std::chrono::steady_clock::now();
    const Experiment experiment(config);
    write_config(dir, config);
    log("run directory " + dir.string() + ", " + std::to_string(resolve_jobs(config.jobs)) + " worker(s)");
    try {
        Outcome outcome = commands().at(inv.command)(experiment, dir, log);
        outcome.metadata["wall_seconds"] =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        outcome.metadata["jobs"] = resolve_jobs(config.jobs);
        write_metadata(dir, inv.command, outcome.metadata.dump());
        outcome.summary["output"] = dir.string();
        print_summary(out, inv.command, "ok", std::move(outcome.summary));
        return kExitOk;
    } catch (const NumericalError& e) {
        write_failure_record(dir, inv.command, "numerical", e.what());
        throw;
    }
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Variational calibration of power-system load models", "gridcal"};
    app.require_subcommand(1, 1);
    app.set_version_flag("--version", std::string(kVersion));

    Invocation inv;
    const std::vector<std::pair<std::string, std::string>> subcommands{
        {"simulate", "Simulate the configured scenario at the true parameters"},
        {"synthesize", "Write noisy twin-experiment observations"},
        {"calibrate", "MAP estimate, Laplace posterior and uncertainty cone"},
        {"predict", "Calibrate on the scenario and predict every contingency"},
        {"sweep", "Full calibration x prediction matrix over the contingency set"},
        {"tlm-compare", "Full-dynamics against linearized calibration"},
        {"report", "SVG plots and CSV tables from an existing run directory"},
    };
    for (const auto& [name, description] : subcommands) {
        CLI::App* sub = app.add_subcommand(name, description);
        sub->allow_extras();
        sub->add_option("--config", inv.config_path, "Run config (JSON)")->required();
        sub->add_option("--output", inv.output, "Run directory (overrides the config)");
        sub->add_option("--jobs", inv.jobs, "Worker threads; 0 = all cores (default: GRIDCAL_JOBS, then config)")
            ->check(CLI::NonNegativeNumber);
        sub->callback([&inv, sub, name = name] {
            inv.command = name;
            inv.overrides = collect_overrides(sub->remaining());
        });
    }

    // CLI11 reports a stray positional as a missing subcommand; name it instead.
    if (!args.empty() && !args.front().empty() && args.front().front() != '-' &&
        std::none_of(subcommands.begin(), subcommands.end(), [&](const auto& s) { return s.first == args.front(); })) {
        err << "gridcal: unknown subcommand '" << args.front() << "'\n\n" << app.help();
        return kExitUsage;
    }

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::CallForVersion&) {
        out << kVersion << '\n';
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "gridcal: " << e.what() << "\n\n" << app.help();
        return kExitUsage;
    } catch (const UsageError& e) {
        err << "gridcal: " << e.what() << "\n\n" << app.help();
        return kExitUsage;
    }

    try {
        return execute(inv, out, err);
    } catch (const UsageError& e) {
        err << "gridcal: " << e.what() << '\n';
        print_summary(out, inv.command, "usage_error", json{{"message", e.what()}});
        return kExitUsage;
    } catch (const NumericalError& e) {
        err << "gridcal: numerical failure: " << e.what() << '\n';
        print_summary(out, inv.command, "numerical_failure", json{{"message", e.what()}});
        return kExitNumerical;
    } catch (const Error& e) {
        err << "gridcal: " << e.what() << '\n';
        print_summary(out, inv.command, "config_error", json{{"message", e.what()}});
        return kExitUsage;
    } catch (const fs::filesystem_error& e) {
        err << "gridcal: " << e.what() << '\n';
        print_summary(out, inv.command, "io_error", json{{"message", e.what()}});
        return kExitUsage;
    }
}

}  // namespace gridcal::cli
