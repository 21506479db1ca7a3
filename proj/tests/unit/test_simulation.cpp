// SPDX-License-Identifier: Apache-2.0
#include <cmath>

#include <gtest/gtest.h>

#include "gridcal/dae.hpp"
#include "gridcal/error.hpp"
#include "gridcal/network.hpp"
#include "gridcal/simulation.hpp"
#include "support.hpp"

namespace gridcal {
namespace {

// ẋ = −a x with a fixed, θ unused.
class ScalarDecay final : public DaeSystem {
public:
    std::size_t differential_size() const override { return 1; }
    std::size_t algebraic_size() const override { return 0; }
    std::size_t parameter_size() const override { return 1; }
    void evaluate(double, const Vector& z, const Parameters&, Vector& h, Matrix* dh_dz,
                  Matrix* dh_dtheta) const override {
        h = -z;
        if (dh_dz) *dh_dz = -Matrix::Identity(1, 1);
        if (dh_dtheta) *dh_dtheta = Matrix::Zero(1, 1);
    }
};

std::vector<double> schedule() { return uniform_times(1.0 / 30.0, 1.0 / 30.0, 30); }

double max_deviation(const Trajectory& traj, const Vector& z0) {
    double worst = 0.0;
    for (const Vector& z : traj.states) worst = std::max(worst, (z - z0).lpNorm<Eigen::Infinity>());
    return worst;
}

double voltage_magnitude(const PowerSystemModel& model, const Vector& z, int bus) {
    const std::size_t i = model.voltage_index(bus);
    return std::hypot(z(static_cast<Eigen::Index>(i)), z(static_cast<Eigen::Index>(i + 1)));
}

TEST(BackwardEuler, ScalarDecayClosedForm) {
    const ScalarDecay sys;
    const StepResult r = step_backward_euler(sys, Vector::Ones(1), 0.1, 0.1, Parameters::Zero(1), {});
    EXPECT_NEAR(r.z(0), 1.0 / 1.1, 1e-12);
    EXPECT_LT(backward_euler_residual(sys, Vector::Ones(1), r.z, 0.1, 0.1, Parameters::Zero(1)).lpNorm<Eigen::Infinity>(),
              1e-8);
}

TEST(BackwardEuler, ParameterFreeDynamicsHaveZeroSensitivity) {
    const ScalarDecay sys;
    const std::vector<double> grid{0.0, 0.1, 0.2, 0.3};
    const std::vector<std::size_t> record{1, 2, 3};
    const IntegrationResult r = integrate(sys, Vector::Ones(1), Parameters::Zero(1), grid, record, true, {});
    ASSERT_TRUE(r.sensitivities);
    for (const Matrix& s : r.sensitivities->sensitivities) EXPECT_EQ(s.norm(), 0.0);
    EXPECT_NEAR(r.trajectory.states.back()(0), std::pow(1.0 / 1.1, 3), 1e-12);
}

TEST(SteadyState, TwoBusEquilibriumResidual) {
    const PowerSystemModel& model = test::two_bus();
    const NetworkView net(model.grid());
    const PowerSystemDae dae(model, net);
    for (double theta : {0.0, 0.5, 1.0}) {
        Vector h;
        dae.evaluate(0.0, model.initial_state(), Parameters::Constant(1, theta), h, nullptr, nullptr);
        EXPECT_LT(h.lpNorm<Eigen::Infinity>(), 1e-8) << "theta = " << theta;
    }
}

TEST(SteadyState, NineBusEquilibriumIndependentOfTheta) {
    const PowerSystemModel& model = test::wscc9();
    const NetworkView net(model.grid());
    const PowerSystemDae dae(model, net);
    for (double theta : {0.0, 0.37, 1.0}) {
        Vector h;
        dae.evaluate(0.0, model.initial_state(), Parameters::Constant(3, theta), h, nullptr, nullptr);
        EXPECT_LT(h.lpNorm<Eigen::Infinity>(), 1e-8);
    }
    const SteadyState a = initialize_steady_state(model, Parameters::Constant(3, 0.1));
    const SteadyState b = initialize_steady_state(model, Parameters::Constant(3, 0.9));
    EXPECT_EQ(a.x0, b.x0);
    EXPECT_EQ(a.y0, b.y0);
}

TEST(Simulate, FlatRunWithoutFault) {
    const PowerSystemModel& model = test::wscc9();
    for (double theta : {0.2, 0.9}) {
        const Trajectory traj = simulate(model, Parameters::Constant(3, theta), std::nullopt, schedule());
        EXPECT_LT(max_deviation(traj, model.initial_state()), 1e-6);
    }
}

TEST(Simulate, SamplesExactlyTheRequestedTimes) {
    const std::vector<double> times{0.0, 0.01, 0.25, 0.4};
    const Trajectory traj = simulate(test::wscc9(), Parameters::Constant(3, 0.5), std::nullopt, times);
    EXPECT_EQ(traj.times, times);
    EXPECT_EQ(traj.states.front(), test::wscc9().initial_state());
}

TEST(Simulate, RejectsNonIncreasingTimes) {
    const std::vector<double> times{0.1, 0.1};
    EXPECT_THROW(simulate(test::wscc9(), Parameters::Constant(3, 0.5), std::nullopt, times), ValidationError);
}

TEST(Simulate, FaultDipsThenRecovers) {
    const PowerSystemModel& model = test::wscc9();
    const std::vector<double> times = uniform_times(0.0, 1.0 / 120.0, 121);
    const Trajectory traj = simulate(model, Parameters::Constant(3, 0.9), FaultScenario{1, 0.01, 0.1, 0.1 + 2.0 / 60.0}, times);
    const double v0 = voltage_magnitude(model, model.initial_state(), 1);
    double during = v0;
    for (std::size_t k = 0; k < times.size(); ++k) {
        if (times[k] >= 0.1 && times[k] < 0.13) during = std::min(during, voltage_magnitude(model, traj.states[k], 1));
    }
    EXPECT_LT(during, 0.5 * v0);
    EXPECT_GT(voltage_magnitude(model, traj.states.back(), 1), 0.9 * v0);
}

TEST(Simulate, LowerImpedanceGivesDeeperDip) {
    const PowerSystemModel& model = test::wscc9();
    const std::vector<double> times = uniform_times(0.0, 1.0 / 120.0, 30);
    const auto dip = [&](double z) {
        const Trajectory t = simulate(model, Parameters::Constant(3, 0.9), FaultScenario{5, z, 0.05, 0.05 + 2.0 / 60.0}, times);
        double lowest = INFINITY;
        for (const Vector& s : t.states) lowest = std::min(lowest, voltage_magnitude(model, s, 5));
        return voltage_magnitude(model, model.initial_state(), 5) - lowest;
    };
    EXPECT_GT(dip(0.01), dip(0.5));
}

TEST(Simulate, BitIdenticalReruns) {
    const FaultScenario s = FaultScenario::two_cycle(3, 0.03, 0.05, 60.0);
    const Parameters theta = Parameters::Constant(3, 0.7);
    const SimulationResult a = simulate_with_sensitivities(test::wscc9(), theta, s, schedule());
    const SimulationResult b = simulate_with_sensitivities(test::wscc9(), theta, s, schedule());
    ASSERT_EQ(a.trajectory.states.size(), b.trajectory.states.size());
    for (std::size_t k = 0; k < a.trajectory.states.size(); ++k) {
        EXPECT_EQ(a.trajectory.states[k], b.trajectory.states[k]);
        EXPECT_EQ(a.sensitivities.sensitivities[k], b.sensitivities.sensitivities[k]);
    }
    EXPECT_EQ(simulate(test::wscc9(), theta, s, schedule()).states, a.trajectory.states);
}

TEST(Sensitivities, ZeroAtInitialTime) {
    const std::vector<double> times{0.0, 0.1};
    const SimulationResult r =
        simulate_with_sensitivities(test::wscc9(), Parameters::Constant(3, 0.4), FaultScenario{3, 0.01, 0.05, 0.09}, times);
    EXPECT_EQ(r.sensitivities.sensitivities.front().norm(), 0.0);
    EXPECT_GT(r.sensitivities.sensitivities.back().norm(), 0.0);
}

TEST(Sensitivities, MatchCentralDifferences) {
    const PowerSystemModel& model = test::wscc9();
    const FaultScenario s = FaultScenario::two_cycle(3, 0.01, 0.05, 60.0);
    const Parameters theta = (Parameters(3) << 0.3, 0.6, 0.8).finished();
    const SimulationResult r = simulate_with_sensitivities(model, theta, s, schedule());
    const double eps = 1e-6;
    for (Eigen::Index j = 0; j < 3; ++j) {
        // Pre-fault columns are ~0; compare against the column's peak magnitude.
        double peak = 0.0;
        for (const Matrix& sk : r.sensitivities.sensitivities) peak = std::max(peak, sk.col(j).norm());
        ASSERT_GT(peak, 1e-3);
        Parameters up = theta;
        Parameters down = theta;
        up(j) += eps;
        down(j) -= eps;
        const Trajectory tu = simulate(model, up, s, schedule());
        const Trajectory td = simulate(model, down, s, schedule());
        for (std::size_t k = 0; k < tu.states.size(); ++k) {
            const Vector fd = (tu.states[k] - td.states[k]) / (2 * eps);
            const Vector col = r.sensitivities.sensitivities[k].col(j);
            EXPECT_LT((fd - col).norm() / std::max(col.norm(), peak), 1e-4) << "k=" << k << " j=" << j;
        }
    }
}

TEST(Sensitivities, PropagateMatchesSinglePass) {
    const FaultScenario s = FaultScenario::two_cycle(5, 0.1, 0.05, 60.0);
    const Parameters theta = Parameters::Constant(3, 0.45);
    const SimulationResult r = simulate_with_sensitivities(test::wscc9(), theta, s, schedule());
    const SensitivityTrajectory again = propagate_sensitivities(test::wscc9(), theta, r.trajectory, s);
    ASSERT_EQ(again.sensitivities.size(), r.sensitivities.sensitivities.size());
    for (std::size_t k = 0; k < again.sensitivities.size(); ++k) {
        EXPECT_EQ(again.sensitivities[k], r.sensitivities.sensitivities[k]);
    }
    Trajectory tampered = r.trajectory;
    tampered.states[3](0) += 1e-9;
    EXPECT_THROW(propagate_sensitivities(test::wscc9(), theta, tampered, s), ValidationError);
}

TEST(Surrogate, ExactAtReferenceAndSecondOrderAway) {
    const PowerSystemModel& model = test::wscc9();
    const FaultScenario s = FaultScenario::two_cycle(3, 0.03, 0.05, 60.0);
    const Parameters ref = Parameters::Constant(3, 0.5);
    const SimulationResult r = simulate_with_sensitivities(model, ref, s, schedule());
    const Trajectory same = simulate_tlm_surrogate(ref, ref, r.trajectory, r.sensitivities);
    EXPECT_EQ(same.states, r.trajectory.states);

    const Vector dir = (Vector(3) << 1.0, -0.5, 0.25).finished();
    const auto remainder = [&](double eps) {
        const Parameters theta = ref + eps * dir;
        const Trajectory full = simulate(model, theta, s, schedule());
        const Trajectory lin = simulate_tlm_surrogate(theta, ref, r.trajectory, r.sensitivities);
        double worst = 0.0;
        for (std::size_t k = 0; k < full.states.size(); ++k) {
            worst = std::max(worst, (full.states[k] - lin.states[k]).lpNorm<Eigen::Infinity>());
        }
        return worst;
    };
    const double e1 = remainder(0.04);
    const double e2 = remainder(0.02);
    EXPECT_LT(e2 / 0.02, e1 / 0.04);
    EXPECT_NEAR(e1 / e2, 4.0, 1.0);
}

TEST(TimeGrid, RefinesEachInterval) {
    const std::vector<double> times{1.0 / 30.0, 2.0 / 30.0};
    const TimeGrid g = build_time_grid(times, 4);
    ASSERT_EQ(g.points.size(), 9u);
    EXPECT_EQ(g.points.front(), 0.0);
    EXPECT_EQ(g.record, (std::vector<std::size_t>{4, 8}));
    EXPECT_EQ(g.points[4], times[0]);
    EXPECT_EQ(g.points[8], times[1]);
}

TEST(TimeGrid, FaultInstantsSnapToNearestPoint) {
    const std::vector<double> points{0.0, 0.1, 0.2, 0.3, 0.4};
    const FaultScenario s = snap_to_grid(FaultScenario{1, 0.01, 0.12, 0.26}, points);
    EXPECT_EQ(s.t_fault, 0.1);
    EXPECT_EQ(s.t_clear, 0.3);
    const FaultScenario narrow = snap_to_grid(FaultScenario{1, 0.01, 0.11, 0.12}, points);
    EXPECT_EQ(narrow.t_fault, 0.1);
    EXPECT_EQ(narrow.t_clear, 0.2);
}

}  // namespace
}  // namespace gridcal
