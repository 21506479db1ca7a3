// SPDX-License-Identifier: Apache-2.0
#include <filesystem>

#include <benchmark/benchmark.h>

#include "gridcal/experiments.hpp"
#include "gridcal/simulation.hpp"

namespace {

using namespace gridcal;

struct Setup {
    Experiment exp;
    ObservationSet obs;
    PowerSystemForward full;
    LinearizedForward tlm;

    explicit Setup(const std::string& config)
        : exp(load_run_config(std::filesystem::path(GRIDCAL_BENCH_DATA_DIR) / "configs" / config)),
          obs(exp.synthesize(exp.config().scenario)),
          full(exp.forward(exp.config().scenario)),
          tlm(LinearizedForward::around(full, exp.prior().mean())) {}
};

Setup& nine_bus() {
    static Setup s("twin9.json");
    return s;
}

Setup& thirty_nine_bus() {
    static Setup s("ieee39.json");
    return s;
}

Setup& pick(const benchmark::State& state) { return state.range(0) == 9 ? nine_bus() : thirty_nine_bus(); }

void BM_Simulate(benchmark::State& state) {
    Setup& s = pick(state);
    const FaultScenario f = s.exp.scenario(s.exp.config().scenario);
    for (auto _ : state) {
        benchmark::DoNotOptimize(simulate(s.exp.model(), s.exp.theta_true(), f, s.exp.times()));
    }
}

void BM_SimulateWithSensitivities(benchmark::State& state) {
    Setup& s = pick(state);
    const FaultScenario f = s.exp.scenario(s.exp.config().scenario);
    for (auto _ : state) {
        benchmark::DoNotOptimize(simulate_with_sensitivities(s.exp.model(), s.exp.theta_true(), f, s.exp.times()));
    }
}

void BM_ObjectiveFull(benchmark::State& state) {
    Setup& s = pick(state);
    for (auto _ : state) benchmark::DoNotOptimize(objective(s.exp.prior().mean(), s.obs, s.exp.prior(), s.full));
}

void BM_ObjectiveStoredTlm(benchmark::State& state) {
    Setup& s = pick(state);
    for (auto _ : state) benchmark::DoNotOptimize(objective(s.exp.prior().mean(), s.obs, s.exp.prior(), s.tlm));
}

void BM_GradientFull(benchmark::State& state) {
    Setup& s = pick(state);
    for (auto _ : state) benchmark::DoNotOptimize(gradient(s.exp.prior().mean(), s.obs, s.exp.prior(), s.full));
}

void BM_Linearize(benchmark::State& state) {
    Setup& s = pick(state);
    for (auto _ : state) benchmark::DoNotOptimize(LinearizedForward::around(s.full, s.exp.prior().mean()));
}

void BM_SamplePosterior(benchmark::State& state) {
    const PosteriorApprox post = make_posterior(Parameters::Constant(3, 0.9), 1e4 * Matrix::Identity(3, 3),
                                                Vector::Zero(3), Vector::Ones(3));
    for (auto _ : state) benchmark::DoNotOptimize(sample_posterior(post, 200, 1));
}

}  // namespace

BENCHMARK(BM_Simulate)->Arg(9)->Arg(39)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_SimulateWithSensitivities)->Arg(9)->Arg(39)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ObjectiveFull)->Arg(9)->Arg(39)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ObjectiveStoredTlm)->Arg(9)->Arg(39)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_GradientFull)->Arg(9)->Arg(39)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Linearize)->Arg(9)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_SamplePosterior)->Unit(benchmark::kMicrosecond);
BENCHMARK_MAIN();
