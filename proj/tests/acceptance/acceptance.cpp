// SPDX-License-Identifier: Apache-2.0
// End-to-end acceptance run: one PASS/FAIL line per criterion, exit 1 on any FAIL.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <numbers>
#include <random>
#include <sstream>
#include <string>

#include "cli.hpp"
#include "gridcal/error.hpp"
#include "gridcal/experiments.hpp"
#include "gridcal/simulation.hpp"

namespace {

using namespace gridcal;
namespace fs = std::filesystem;

const fs::path kData = GRIDCAL_TEST_DATA_DIR;

struct Verdict {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* pattern, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, pattern, args...);
    return buf;
}

RunConfig twin9(const std::vector<std::string>& overrides = {}) {
    return load_run_config(kData / "configs" / "twin9.json", overrides);
}

double mean_of(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

// 1. Gradient vs central differences at 5 random feasible θ.
Verdict gradient_correctness() {
    const Experiment exp(twin9());
    const ContingencyConfig& c = exp.config().scenario;
    const ObservationSet obs = exp.synthesize(c);
    const PowerSystemForward fwd = exp.forward(c);
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> unif(0.05, 0.95);
    const double eps = 1e-6;
    double worst = 0.0;
    for (int trial = 0; trial < 5; ++trial) {
        Parameters theta(3);
        for (Eigen::Index j = 0; j < 3; ++j) theta(j) = unif(rng);
        const Vector g = gradient(theta, obs, exp.prior(), fwd);
        for (Eigen::Index j = 0; j < 3; ++j) {
            Parameters up = theta;
            Parameters down = theta;
            up(j) += eps;
            down(j) -= eps;
            const double fd = (objective(up, obs, exp.prior(), fwd) - objective(down, obs, exp.prior(), fwd)) / (2 * eps);
            worst = std::max(worst, std::abs(fd - g(j)) / std::abs(g(j)));
        }
    }
    return {worst < 1e-5, fmt("worst relative error %.3e (< 1e-5)", worst)};
}

// 2. Forward sensitivities vs central differences, every column at every instant.
Verdict tlm_correctness() {
    const Experiment exp(twin9());
    const FaultScenario s = exp.scenario(exp.config().scenario);
    const Parameters theta = (Parameters(3) << 0.3, 0.6, 0.8).finished();
    const SimulationResult r =
        simulate_with_sensitivities(exp.model(), theta, s, exp.times(), exp.config().simulation);
    const double eps = 1e-6;
    double worst = 0.0;
    std::size_t compared = 0;
    std::size_t null_columns = 0;
    for (Eigen::Index j = 0; j < 3; ++j) {
        Parameters up = theta;
        Parameters down = theta;
        up(j) += eps;
        down(j) -= eps;
        const Trajectory tu = simulate(exp.model(), up, s, exp.times(), exp.config().simulation);
        const Trajectory td = simulate(exp.model(), down, s, exp.times(), exp.config().simulation);
        for (std::size_t k = 0; k < tu.states.size(); ++k) {
            const Vector fd = (tu.states[k] - td.states[k]) / (2 * eps);
            const Vector col = r.sensitivities.sensitivities[k].col(j);
            // Before the fault the equilibrium does not depend on θ: both sides are
            // round-off (< 1e-9) and carry no relative information.
            if (std::max(col.norm(), fd.norm()) < 1e-9) {
                ++null_columns;
                continue;
            }
            worst = std::max(worst, (fd - col).norm() / col.norm());
            ++compared;
        }
    }
    return {worst < 1e-4 && compared > 0,
            fmt("worst relative error %.3e over %zu columns (< 1e-4); %zu pre-fault columns below 1e-9", worst,
                compared, null_columns)};
}

// 3. Linear-Gaussian model against independently solved normal equations.
Verdict conjugate_oracle() {
    const std::vector<Matrix> a{(Matrix(4, 3) << 1.0, 0.5, 0.0, -0.2, 1.0, 0.3, 0.3, 0.3, 0.9, 0.0, -0.4, 0.2).finished(),
                                (Matrix(4, 3) << 0.7, -0.1, 0.2, 0.0, 2.0, 0.0, 1.1, 0.4, -0.3, 0.5, 0.0, 0.6).finished()};
    const std::vector<Vector> b{Vector::Constant(4, 0.1), Vector::Constant(4, -0.05)};
    const Vector truth = (Vector(3) << 0.3, 0.65, 0.55).finished();
    const Vector wobble = (Vector(4) << 0.01, -0.02, 0.015, 0.005).finished();
    ObservationSet obs;
    obs.times = {0.1, 0.2};
    obs.data = {a[0] * truth + b[0] + wobble, a[1] * truth + b[1] - wobble};
    obs.noise_variance = Vector::Constant(4, 0.01);
    obs.channels = {"c0", "c1", "c2", "c3"};
    const TruncatedGaussian prior = TruncatedGaussian::isotropic(3, 0.5, 0.04);
    const AffineForward fwd(a, b);

    OptimizerOptions opt;
    opt.pgtol = 1e-12;
    opt.max_iters = 200;
    const InversionResult map = solve_map(obs, prior, fwd, opt);
    const PosteriorApprox post = build_posterior(map.theta_map, obs, prior, fwd);

    Matrix info = Matrix::Identity(3, 3) / 0.04;
    Vector rhs = prior.mean() / 0.04;
    for (std::size_t k = 0; k < 2; ++k) {
        info += a[k].transpose() * a[k] / 0.01;
        rhs += a[k].transpose() * (obs.data[k] - b[k]) / 0.01;
    }
    const Vector theta_oracle = info.fullPivLu().solve(rhs);
    const Matrix cov_oracle = info.fullPivLu().inverse();
    const double theta_err = (map.theta_map - theta_oracle).lpNorm<Eigen::Infinity>();
    const double cov_err = (post.covariance() - cov_oracle).cwiseAbs().maxCoeff();
    return {theta_err < 1e-8 && cov_err < 1e-10 && prior.contains(theta_oracle),
            fmt("θ_MAP error %.3e (< 1e-8), Σ_post error %.3e (< 1e-10)", theta_err, cov_err)};
}

// 4. Twin-experiment recovery at impedance 0.01.
Verdict twin_recovery() {
    const Experiment exp(twin9());
    const InversionExperiment r = run_inversion_experiment(exp, exp.config().scenario);
    const double err = (r.inversion.theta_map - exp.theta_true()).lpNorm<Eigen::Infinity>();
    const double ratio = mean_of(r.rmse_map) / mean_of(r.rmse_prior);
    return {err < 0.05 && ratio < 0.2,
            fmt("‖θ_MAP − θ_true‖∞ = %.4f (< 0.05), mean RMSE MAP/prior = %.4f (< 0.2)", err, ratio)};
}

// 5. Parameter error grows and prior-mean RMSE shrinks with impedance.
Verdict impedance_monotonicity() {
    const Experiment exp(twin9());
    std::vector<double> errors;
    std::vector<double> prior_rmse;
    std::string detail;
    for (double z : {0.03, 0.1, 0.5}) {
        ContingencyConfig c = exp.config().scenario;
        c.impedance = z;
        const InversionExperiment r = run_inversion_experiment(exp, c);
        errors.push_back((r.inversion.theta_map - exp.theta_true()).norm());
        prior_rmse.push_back(mean_of(r.rmse_prior));
        detail += fmt("%sz=%.2f: err %.4f, prior RMSE %.5f", detail.empty() ? "" : "; ", z, errors.back(),
                      prior_rmse.back());
    }
    const bool pass =
        errors[0] <= errors[1] && errors[1] <= errors[2] && prior_rmse[0] >= prior_rmse[1] && prior_rmse[1] >= prior_rmse[2];
    return {pass, detail};
}

// 6. Mean coverage is non-decreasing in λ on a 3×3 matrix at impedance 0.01.
Verdict inflation_coverage() {
    const Experiment exp(twin9({"contingencies.buses=[3,5,9]", "contingencies.impedances=[0.01]",
                                "uq.lambdas=[0,0.001,0.005]", "uq.n_ensemble=200"}));
    const PredictionReport r = run_prediction_matrix(exp, exp.config().contingencies());
    const double c0 = r.mean_coverage(0.0);
    const double c1 = r.mean_coverage(0.001);
    const double c2 = r.mean_coverage(0.005);
    return {r.complete && c1 >= c0 - 2.0 && c2 >= c1 - 2.0,
            fmt("mean coverage %.2f%% (λ=0) -> %.2f%% (λ=0.001) -> %.2f%% (λ=0.005), tolerance 2 points", c0, c1, c2)};
}

const TlmComparison& tlm_comparison() {
    static const TlmComparison cmp = [] {
        const Experiment exp(twin9());
        return run_tlm_comparison(exp, exp.config().scenario, exp.config().timing_calls);
    }();
    return cmp;
}

// 7. Full dynamics beat the prior-linearized and refreshed surrogates.
Verdict tlm_bias() {
    const TlmComparison& cmp = tlm_comparison();
    const double full = cmp.mode("full").parameter_error;
    const double prior = cmp.mode("tlm-at-prior").parameter_error;
    const double refreshed = cmp.mode("tlm-refreshed").parameter_error;
    const double truth = cmp.mode("tlm-at-truth").parameter_error;
    return {full < prior && full < refreshed,
            fmt("‖θ_MAP − θ_true‖₂: full %.4f, at-prior %.4f, refreshed %.4f (at-truth %.4f)", full, prior, refreshed,
                truth)};
}

// 8. Stored-TLM objective is at least 5x cheaper than the full objective.
Verdict cost_ordering() {
    const TlmComparison& cmp = tlm_comparison();
    const double full = cmp.mode("full").objective_seconds;
    const double tlm = cmp.mode("tlm-at-prior").objective_seconds;
    return {tlm < 0.2 * full, fmt("median objective %.3e s (stored TLM) vs %.3e s (full), ratio %.4f (< 0.2)", tlm,
                                  full, tlm / full)};
}

// 9. ±2σ truncated sampling against the truncated-normal variance.
Verdict truncated_sampling() {
    const double a = 2.0;
    const double pdf = std::exp(-0.5 * a * a) / std::sqrt(2.0 * std::numbers::pi);
    const double mass = std::erf(a / std::numbers::sqrt2);
    const double oracle = 1.0 - 2.0 * a * pdf / mass;
    const PosteriorApprox post =
        make_posterior(Parameters::Zero(1), Matrix::Identity(1, 1), Vector::Constant(1, -100.0), Vector::Constant(1, 100.0));
    const std::vector<Parameters> samples = sample_posterior(post, 100000, 2024);
    double mean = 0.0;
    for (const Parameters& s : samples) mean += s(0);
    mean /= static_cast<double>(samples.size());
    double var = 0.0;
    for (const Parameters& s : samples) var += (s(0) - mean) * (s(0) - mean);
    var /= static_cast<double>(samples.size() - 1);
    const double rel = std::abs(var / oracle - 1.0);
    return {rel < 0.05, fmt("sample variance %.5f vs oracle %.5f, relative gap %.4f (< 0.05)", var, oracle, rel)};
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

std::map<std::string, std::string> artifact_tree(const fs::path& root) {
    std::map<std::string, std::string> files;
    for (const auto& e : fs::recursive_directory_iterator(root)) {
        if (e.is_regular_file() && e.path().filename() != "metadata.json") {
            files[fs::relative(e.path(), root).string()] = slurp(e.path());
        }
    }
    return files;
}

// 10. Every subcommand re-run with the same config produces the same tree.
// metadata.json holds wall-clock data and is excluded by design.
Verdict determinism() {
    const fs::path root = fs::temp_directory_path() / ("gridcal-acceptance-" + std::to_string(::getpid()));
    fs::remove_all(root);
    const std::string config = (kData / "configs" / "twin9.json").string();
    const std::vector<std::string> small{"--contingencies.buses=[3,5]", "--contingencies.impedances=[0.01]",
                                         "--uq.n_ensemble=50"};
    std::string detail;
    bool pass = true;
    for (const std::string command : {"simulate", "synthesize", "calibrate", "predict", "sweep", "tlm-compare"}) {
        std::vector<fs::path> dirs;
        for (int rep = 0; rep < 2; ++rep) {
            const fs::path dir = root / command / std::to_string(rep);
            std::vector<std::string> args{command, "--config", config, "--output", dir.string()};
            args.insert(args.end(), small.begin(), small.end());
            std::ostringstream out;
            std::ostringstream err;
            int code = cli::run(args, out, err);
            if (code == cli::kExitOk && command == "calibrate") {
                code = cli::run({"report", "--config", config, "--output", dir.string()}, out, err);
            }
            if (code != cli::kExitOk) {
                pass = false;
                detail += command + " exited " + std::to_string(code) + "; ";
            }
            dirs.push_back(dir);
        }
        const auto a = artifact_tree(dirs[0]);
        const auto b = artifact_tree(dirs[1]);
        const bool same = !a.empty() && a == b;
        pass = pass && same;
        detail += fmt("%s%s: %zu files %s", detail.empty() ? "" : "; ", command.c_str(), a.size(),
                      same ? "identical" : "DIFFER");
    }
    fs::remove_all(root);
    return {pass, detail};
}

}  // namespace

int main() {
    const std::vector<std::pair<std::string, std::function<Verdict()>>> criteria{
        {"1 gradient correctness", gradient_correctness},
        {"2 TLM correctness", tlm_correctness},
        {"3 conjugate oracle", conjugate_oracle},
        {"4 twin-experiment recovery", twin_recovery},
        {"5 impedance monotonicity", impedance_monotonicity},
        {"6 inflation improves coverage", inflation_coverage},
        {"7 TLM bias", tlm_bias},
        {"8 cost ordering", cost_ordering},
        {"9 truncated-sampling statistics", truncated_sampling},
        {"10 determinism", determinism},
    };
    int failures = 0;
    for (const auto& [name, check] : criteria) {
        const auto start = std::chrono::steady_clock::now();
        Verdict v;
        try {
            v = check();
        } catch (const std::exception& e) {
            v = {false, std::string("threw: ") + e.what()};
        }
        const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        failures += v.pass ? 0 : 1;
        std::printf("%s criterion %s: %s [%.1f s]\n", v.pass ? "PASS" : "FAIL", name.c_str(), v.detail.c_str(), seconds);
        std::fflush(stdout);
    }
    std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failures, criteria.size());
    return failures == 0 ? 0 : 1;
}
