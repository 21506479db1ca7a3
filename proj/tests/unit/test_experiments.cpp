// SPDX-License-Identifier: Apache-2.0
#include <fstream>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "gridcal/error.hpp"
#include "gridcal/experiments.hpp"
#include "support.hpp"

namespace gridcal {
namespace {

namespace fs = std::filesystem;

RunConfig nine_bus_config(const std::vector<std::string>& overrides = {}) {
    return parse_run_config(R"({"grid": "../grids/wscc9.json", "seed": 7, "scenario": {"bus": 3}})",
                            test::data_dir() / "configs", overrides);
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

std::map<std::string, std::string> tree(const fs::path& root) {
    std::map<std::string, std::string> files;
    for (const auto& e : fs::recursive_directory_iterator(root)) {
        if (e.is_regular_file()) files[fs::relative(e.path(), root).string()] = slurp(e.path());
    }
    return files;
}

UncertaintyCone cone_of(std::vector<Vector> mean, double sigma) {
    UncertaintyCone cone;
    cone.sigma.assign(mean.size(), Vector::Constant(mean.front().size(), sigma));
    cone.mean = std::move(mean);
    return cone;
}

TEST(Rmse, Examples) {
    const Vector x = (Vector(2) << 1.0, -2.0).finished();
    EXPECT_EQ(rmse(x, x), 0.0);
    EXPECT_NEAR(rmse((Vector(2) << 3.0, 4.0).finished(), Vector::Zero(2)), std::sqrt(12.5), 1e-15);
    for (int n : {1, 5, 40}) EXPECT_NEAR(rmse(Vector::Constant(n, -0.25), Vector::Zero(n)), 0.25, 1e-15);
    EXPECT_THROW(rmse(Vector::Zero(2), Vector::Zero(3)), ValidationError);
}

TEST(Rmse, DetectsAnyTranslation) {
    const Vector base = Vector::LinSpaced(6, 0.0, 1.0);
    for (Eigen::Index i = 0; i < 6; ++i) {
        Vector moved = base;
        moved(i) += 1e-9;
        EXPECT_GT(rmse(moved, base), 0.0);
    }
}

TEST(Coverage, Extremes) {
    const std::vector<Vector> truth(4, Vector::Constant(3, 1.0));
    EXPECT_EQ(coverage(truth, cone_of(std::vector<Vector>(4, Vector::Zero(3)), 1e300)), 100.0);
    EXPECT_EQ(coverage(truth, cone_of(std::vector<Vector>(4, Vector::Zero(3)), 0.0)), 0.0);
    EXPECT_THROW(coverage(truth, cone_of(std::vector<Vector>(3, Vector::Zero(3)), 1.0)), ValidationError);
}

TEST(Coverage, GaussianTailFraction) {
    const double oracle = 100.0 * std::erf(2.0 / std::sqrt(2.0));
    std::mt19937_64 rng(99);
    std::normal_distribution<double> normal;
    std::vector<Vector> truth(200, Vector(500));
    for (Vector& v : truth) {
        for (Eigen::Index c = 0; c < v.size(); ++c) v(c) = normal(rng);
    }
    const double got = coverage(truth, cone_of(std::vector<Vector>(200, Vector::Zero(500)), 1.0));
    // 10⁵ pairs: binomial standard error ≈ 0.066 points.
    EXPECT_NEAR(got, oracle, 0.3);
}

TEST(Coverage, MonotoneInSigma) {
    std::mt19937_64 rng(5);
    std::normal_distribution<double> normal;
    std::vector<Vector> truth(20, Vector(10));
    for (Vector& v : truth) {
        for (Eigen::Index c = 0; c < v.size(); ++c) v(c) = normal(rng);
    }
    double previous = -1.0;
    for (double sigma : {0.0, 0.1, 0.3, 0.5, 1.0, 2.0, 10.0}) {
        const double c = coverage(truth, cone_of(std::vector<Vector>(20, Vector::Zero(10)), sigma));
        EXPECT_GE(c, previous);
        EXPECT_GE(c, 0.0);
        EXPECT_LE(c, 100.0);
        previous = c;
    }
}

TEST(RunConfig, DefaultsFilled) {
    const RunConfig c = nine_bus_config();
    EXPECT_EQ(c.seed, 7u);
    EXPECT_TRUE(c.grid_path.is_absolute());
    EXPECT_EQ(c.scenario.bus, 3);
    EXPECT_EQ(c.scenario.impedance, 0.01);
    EXPECT_EQ(c.fault_time, 0.05);
    EXPECT_EQ(c.contingency_impedances, (std::vector<double>{0.01, 0.03, 0.1, 0.5, 1.0}));
    EXPECT_EQ(c.channels, "voltages+currents");
    EXPECT_EQ(c.n_ensemble, 200u);
    EXPECT_EQ(c.lambdas, (std::vector<double>{0.0, 0.001, 0.005}));
    EXPECT_EQ(c.schedule.count, 30u);
    EXPECT_EQ(c.cone_space, "observation");
    EXPECT_EQ(c.optimizer.max_iters, 30);
    EXPECT_EQ(c.simulation.refinement, 4);
}

TEST(RunConfig, ScheduleIsRoundThirtieths) {
    const std::vector<double> t = nine_bus_config().schedule.times();
    ASSERT_EQ(t.size(), 30u);
    EXPECT_DOUBLE_EQ(t.front(), 1.0 / 30.0);
    EXPECT_DOUBLE_EQ(t.back(), 1.0);
}

TEST(RunConfig, OverridesApplyAndAreChecked) {
    const RunConfig c = nine_bus_config({"uq.n_ensemble=12", "--noise.sigma=0.002", "uq.lambdas=[0,0.01]",
                                         "observation.channels=voltages"});
    EXPECT_EQ(c.n_ensemble, 12u);
    EXPECT_EQ(c.noise_sigma, 0.002);
    EXPECT_EQ(c.lambdas, (std::vector<double>{0.0, 0.01}));
    EXPECT_EQ(c.channels, "voltages");
    EXPECT_THROW(nine_bus_config({"uq.n_ensembel=12"}), ValidationError);
    EXPECT_THROW(nine_bus_config({"uq.n_ensemble"}), ValidationError);
    EXPECT_THROW(nine_bus_config({"uq.n_ensemble=\"many\""}), ValidationError);
    EXPECT_THROW(nine_bus_config({"prior.variance=-1"}), ValidationError);
}

TEST(RunConfig, RejectsUnknownAndMissingFields) {
    const fs::path base = test::data_dir() / "configs";
    EXPECT_THROW(parse_run_config(R"({"grid": "../grids/wscc9.json", "seed": 1, "scenario": {"bus": 3}, "colour": 1})",
                                  base),
                 ValidationError);
    EXPECT_THROW(parse_run_config(R"({"grid": "../grids/wscc9.json", "scenario": {"bus": 3}})", base), ValidationError);
    EXPECT_THROW(parse_run_config(R"({"seed": 1, "scenario": {"bus": 3}})", base), ValidationError);
    EXPECT_THROW(parse_run_config(R"({"grid": "../grids/none.json", "seed": 1, "scenario": {"bus": 3}})", base),
                 ValidationError);
    EXPECT_THROW(parse_run_config(R"({"grid": "../grids/wscc9.json", "seed": -4, "scenario": {"bus": 3}})", base),
                 ValidationError);
    EXPECT_THROW(parse_run_config(R"({"grid": )", base), Error);
    EXPECT_THROW(nine_bus_config({"contingencies.buses=[3,3]"}), ValidationError);
}

TEST(RunConfig, UnknownBusRejectedWhenExperimentIsBuilt) {
    EXPECT_THROW(Experiment(nine_bus_config({"scenario.bus=42"})), ValidationError);
    EXPECT_THROW(Experiment(nine_bus_config({"contingencies.buses=[3,42]"})), ValidationError);
}

TEST(RunConfig, FrozenJsonRoundTrips) {
    const RunConfig c = nine_bus_config({"uq.n_ensemble=12", "contingencies.buses=[5,3]"});
    const RunConfig back = parse_run_config(c.frozen_json(), "/");
    EXPECT_EQ(back.frozen_json(), c.frozen_json());
    EXPECT_EQ(back.grid_path, c.grid_path);
    EXPECT_EQ(back.contingency_buses, c.contingency_buses);
}

TEST(RunConfig, ContingencySetIsBusesByImpedances) {
    const RunConfig c = nine_bus_config({"contingencies.buses=[5,9]", "contingencies.impedances=[0.1,0.5]"});
    const std::vector<ContingencyConfig> list = c.contingencies();
    ASSERT_EQ(list.size(), 4u);
    EXPECT_EQ(list[0].id(), "bus5-z0.1");
    EXPECT_EQ(list[3].id(), "bus9-z0.5");
    const FaultScenario s = list[0].resolve(60.0);
    EXPECT_DOUBLE_EQ(s.t_fault, 0.05);
    EXPECT_DOUBLE_EQ(s.t_clear, 0.05 + 2.0 / 60.0);
}

class SmallMatrix : public ::testing::Test {
protected:
    static void SetUpTestSuite() {
        experiment_ = new Experiment(nine_bus_config({"uq.n_ensemble=30", "uq.lambdas=[0,0.005]",
                                                      "contingencies.buses=[3,5]", "contingencies.impedances=[0.01]"}));
        report_ = new PredictionReport(run_prediction_matrix(*experiment_, experiment_->config().contingencies()));
    }
    static void TearDownTestSuite() {
        delete report_;
        delete experiment_;
    }
    static Experiment* experiment_;
    static PredictionReport* report_;
};

Experiment* SmallMatrix::experiment_ = nullptr;
PredictionReport* SmallMatrix::report_ = nullptr;

TEST_F(SmallMatrix, ShapeAndCellInvariants) {
    const PredictionReport& r = *report_;
    EXPECT_TRUE(r.complete);
    EXPECT_TRUE(r.failures.empty());
    EXPECT_EQ(r.inversions.size(), 2u);
    ASSERT_EQ(r.cells.size(), 2u * 2u * 2u);
    for (const PredictionCell& cell : r.cells) {
        EXPECT_GE(cell.coverage, 0.0);
        EXPECT_LE(cell.coverage, 100.0);
        EXPECT_DOUBLE_EQ(cell.coverage_error, 100.0 - cell.coverage);
        EXPECT_EQ(cell.rmse.size(), experiment_->times().size());
        EXPECT_EQ(cell.cone.n_ensemble, 30u);
    }
}

TEST_F(SmallMatrix, InflationDoesNotMoveTheMap) {
    for (const InversionExperiment& inv : report_->inversions) {
        EXPECT_TRUE(experiment_->prior().contains(inv.inversion.theta_map));
        EXPECT_EQ(inv.posterior.inflation, 0.0);
    }
    for (const PredictionCell& a : report_->cells) {
        for (const PredictionCell& b : report_->cells) {
            if (a.calibration == b.calibration && a.prediction == b.prediction && b.lambda > a.lambda) {
                EXPECT_GE(b.coverage, a.coverage - 2.0);
            }
        }
    }
}

TEST_F(SmallMatrix, ReproducibleBitForBit) {
    const PredictionReport again = run_prediction_matrix(*experiment_, experiment_->config().contingencies());
    ASSERT_EQ(again.cells.size(), report_->cells.size());
    for (std::size_t i = 0; i < again.cells.size(); ++i) {
        EXPECT_EQ(again.cells[i].rmse, report_->cells[i].rmse);
        EXPECT_EQ(again.cells[i].coverage, report_->cells[i].coverage);
        EXPECT_EQ(again.cells[i].cone.sigma, report_->cells[i].cone.sigma);
    }
}

TEST_F(SmallMatrix, LowImpedanceMapBeatsPriorMean) {
    const InversionExperiment& inv = report_->inversions.front();
    std::size_t better = 0;
    for (std::size_t k = 0; k < inv.rmse_map.size(); ++k) better += inv.rmse_map[k] < inv.rmse_prior[k] ? 1 : 0;
    EXPECT_GE(better, inv.rmse_map.size() * 8 / 10);
}

TEST(Report, EmptyDirectoryListsExpectedFiles) {
    const test::TempDir dir("report-empty");
    try {
        emit_report(dir.path());
        FAIL() << "expected a validation error";
    } catch (const ValidationError& e) {
        EXPECT_NE(std::string(e.what()).find("config.json"), std::string::npos) << e.what();
    }
}

TEST(Report, SingleInversionGivesOneOfEachPlotDeterministically) {
    const test::TempDir dir("report-one");
    const Experiment exp(nine_bus_config({"uq.n_ensemble=20"}));
    write_config(dir.path(), exp.config());
    write_inversion_experiment(dir.path(), exp, run_inversion_experiment(exp, exp.config().scenario));

    const std::vector<fs::path> files = emit_report(dir.path());
    std::size_t rmse_plots = 0;
    std::size_t parameter_plots = 0;
    std::size_t cone_plots = 0;
    for (const fs::path& f : files) {
        const std::string name = f.filename().string();
        rmse_plots += name.rfind("rmse-", 0) == 0 && f.extension() == ".svg";
        parameter_plots += name.rfind("parameters-", 0) == 0 && f.extension() == ".svg";
        cone_plots += name.rfind("cone-", 0) == 0 && f.extension() == ".svg";
    }
    EXPECT_EQ(rmse_plots, 1u);
    EXPECT_EQ(parameter_plots, 1u);
    EXPECT_EQ(cone_plots, 1u);

    const auto first = tree(dir.path() / "report");
    emit_report(dir.path());
    EXPECT_EQ(tree(dir.path() / "report"), first);
}

TEST(Report, MissingPerRunFileIsNamed) {
    const test::TempDir dir("report-missing");
    const Experiment exp(nine_bus_config({"uq.n_ensemble=20"}));
    write_config(dir.path(), exp.config());
    write_inversion_experiment(dir.path(), exp, run_inversion_experiment(exp, exp.config().scenario));
    fs::path removed;
    for (const auto& e : fs::recursive_directory_iterator(dir.path() / "posterior")) {
        if (e.path().filename() == "cone.csv") removed = e.path();
    }
    ASSERT_FALSE(removed.empty());
    fs::remove(removed);
    try {
        emit_report(dir.path());
        FAIL() << "expected a validation error";
    } catch (const ValidationError& e) {
        EXPECT_NE(std::string(e.what()).find("cone.csv"), std::string::npos) << e.what();
    }
}

}  // namespace
}  // namespace gridcal
