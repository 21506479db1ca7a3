// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <numbers>

#include <gtest/gtest.h>

#include "gridcal/error.hpp"
#include "gridcal/inversion.hpp"
#include "gridcal/posterior.hpp"

namespace gridcal {
namespace {

ObservationSet single_instant(std::size_t channels, double variance) {
    ObservationSet obs;
    obs.times = {0.1};
    obs.data = {Vector::Zero(static_cast<Eigen::Index>(channels))};
    obs.noise_variance = Vector::Constant(static_cast<Eigen::Index>(channels), variance);
    for (std::size_t c = 0; c < channels; ++c) obs.channels.push_back("c" + std::to_string(c));
    return obs;
}

Matrix sample_covariance(const std::vector<Parameters>& samples) {
    const auto n = static_cast<double>(samples.size());
    Vector mean = Vector::Zero(samples.front().size());
    for (const Parameters& s : samples) mean += s;
    mean /= n;
    Matrix cov = Matrix::Zero(mean.size(), mean.size());
    for (const Parameters& s : samples) cov += (s - mean) * (s - mean).transpose();
    return cov / (n - 1.0);
}

double std_normal_pdf(double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi); }
double std_normal_cdf(double x) { return 0.5 * (1.0 + std::erf(x / std::numbers::sqrt2)); }

// Variance of N(0, 1) truncated to [-a, a].
double truncated_variance(double a) { return 1.0 - 2.0 * a * std_normal_pdf(a) / (2.0 * std_normal_cdf(a) - 1.0); }

TEST(Posterior, ZeroSensitivityGivesPriorCovariance) {
    const TruncatedGaussian prior = TruncatedGaussian::isotropic(3, 0.5, 0.01);
    const AffineForward fwd({Matrix::Zero(2, 3)}, {Vector::Zero(2)});
    const PosteriorApprox post = build_posterior(prior.mean(), single_instant(2, 1e-4), prior, fwd);
    EXPECT_TRUE(post.covariance().isApprox(prior.covariance(), 1e-12));
    EXPECT_TRUE(post.base_sigmas.isApprox(Vector::Constant(3, 0.1), 1e-12));
}

TEST(Posterior, ClosedFormCovariance) {
    const Matrix a = (Matrix(3, 2) << 1.0, 0.3, -0.5, 2.0, 0.2, 0.1).finished();
    const TruncatedGaussian prior = TruncatedGaussian::isotropic(2, 0.5, 0.04);
    const AffineForward fwd({a, a}, {Vector::Zero(3), Vector::Zero(3)});
    ObservationSet obs = single_instant(3, 0.01);
    obs.times = {0.1, 0.2};
    obs.data.push_back(Vector::Zero(3));
    const PosteriorApprox post = build_posterior(Parameters::Constant(2, 0.4), obs, prior, fwd);

    const Matrix oracle = (2.0 * a.transpose() * a / 0.01 + Matrix::Identity(2, 2) / 0.04).inverse();
    EXPECT_LT((post.covariance() - oracle).cwiseAbs().maxCoeff(), 1e-10);
    EXPECT_LT((post.factor * post.factor.transpose() - post.information).cwiseAbs().maxCoeff(), 1e-10);
    EXPECT_TRUE(post.factor.isLowerTriangular());
}

TEST(Posterior, MoreDataShrinksMarginals) {
    const Matrix a = (Matrix(2, 2) << 1.0, 0.2, 0.0, 0.5).finished();
    const TruncatedGaussian prior = TruncatedGaussian::isotropic(2, 0.5, 0.01);
    const ObservationSet one = single_instant(2, 0.01);
    ObservationSet two = one;
    two.times.push_back(0.2);
    two.data.push_back(Vector::Zero(2));
    const PosteriorApprox p1 =
        build_posterior(prior.mean(), one, prior, AffineForward({a}, {Vector::Zero(2)}));
    const PosteriorApprox p2 =
        build_posterior(prior.mean(), two, prior, AffineForward({a, a}, {Vector::Zero(2), Vector::Zero(2)}));
    EXPECT_TRUE((p2.base_sigmas.array() < p1.base_sigmas.array()).all());
}

TEST(Posterior, SingularInformationIsReported) {
    const Matrix info = (Matrix(2, 2) << 1.0, 1.0, 1.0, 1.0).finished();
    EXPECT_THROW(make_posterior(Parameters::Constant(2, 0.5), info, Vector::Zero(2), Vector::Ones(2)),
                 SingularMatrixError);
}

TEST(Posterior, InflationWidensMarginalsOnly) {
    const PosteriorApprox base =
        make_posterior(Parameters::Constant(2, 0.5), 1e4 * Matrix::Identity(2, 2), Vector::Zero(2), Vector::Ones(2));
    const PosteriorApprox wide = inflate(base, 0.005);
    EXPECT_EQ(wide.theta_map, base.theta_map);
    EXPECT_EQ(wide.base_sigmas, base.base_sigmas);
    EXPECT_NEAR(wide.marginal_sigmas(0), std::sqrt(1e-4 + 0.005), 1e-14);
    EXPECT_TRUE(wide.covariance().isApprox(base.covariance() + 0.005 * Matrix::Identity(2, 2), 1e-14));
    EXPECT_THROW(inflate(base, -1.0), ValidationError);

    const auto spread = [](const std::vector<Parameters>& s) { return sample_covariance(s).trace(); };
    EXPECT_GT(spread(sample_posterior(wide, 2000, 9)), spread(sample_posterior(base, 2000, 9)));
}

TEST(Sampling, AcceptedSamplesSatisfyBoxAndWindow) {
    const Matrix info = (Matrix(3, 3) << 400, 50, 0, 50, 300, -20, 0, -20, 100).finished();
    const Parameters map = (Parameters(3) << 0.95, 0.5, 0.05).finished();
    const PosteriorApprox post = inflate(make_posterior(map, info, Vector::Zero(3), Vector::Ones(3)), 0.001);
    const std::vector<Parameters> samples = sample_posterior(post, 3000, 21);
    ASSERT_EQ(samples.size(), 3000u);
    for (const Parameters& s : samples) {
        EXPECT_TRUE((s.array() >= 0.0).all() && (s.array() <= 1.0).all());
        EXPECT_TRUE(((s - map).cwiseAbs().array() <= 2.0 * post.marginal_sigmas.array()).all());
    }
}

TEST(Sampling, TruncatedVarianceMatchesClosedForm) {
    const double oracle = truncated_variance(2.0);
    EXPECT_NEAR(oracle, 0.7737, 1e-4);
    const PosteriorApprox post =
        make_posterior(Parameters::Zero(1), Matrix::Identity(1, 1), Vector::Constant(1, -100.0), Vector::Constant(1, 100.0));
    const std::vector<Parameters> samples = sample_posterior(post, 100000, 77);
    EXPECT_NEAR(sample_covariance(samples)(0, 0) / oracle, 1.0, 0.05);
}

TEST(Sampling, WideWindowRecoversCovariance) {
    const Matrix info = (Matrix(2, 2) << 2.0, 0.6, 0.6, 1.0).finished();
    const PosteriorApprox post =
        make_posterior(Parameters::Zero(2), info, Vector::Constant(2, -100.0), Vector::Constant(2, 100.0));
    SamplingOptions opt;
    opt.box_sigmas = 8.0;
    const Matrix cov = sample_covariance(sample_posterior(post, 20000, 5, opt));
    const Matrix oracle = info.inverse();
    EXPECT_LT((cov - oracle).norm() / oracle.norm(), 0.05);
}

TEST(Sampling, IndependentOfWorkerCount) {
    const PosteriorApprox post =
        make_posterior(Parameters::Constant(2, 0.5), 100.0 * Matrix::Identity(2, 2), Vector::Zero(2), Vector::Ones(2));
    SamplingOptions serial;
    SamplingOptions parallel;
    parallel.jobs = 4;
    EXPECT_EQ(sample_posterior(post, 500, 3, serial), sample_posterior(post, 500, 3, parallel));
    EXPECT_NE(sample_posterior(post, 10, 3), sample_posterior(post, 10, 4));
}

TEST(Sampling, CollapsedAcceptanceThrows) {
    // MAP on a corner with a wide window: roughly 1/8 of draws stay in the box,
    // so requiring 50 % acceptance must fail.
    const PosteriorApprox post =
        make_posterior(Parameters::Zero(3), Matrix::Identity(3, 3), Vector::Zero(3), Vector::Ones(3));
    SamplingOptions opt;
    opt.min_acceptance = 0.5;
    EXPECT_THROW(sample_posterior(post, 10, 1, opt), SamplingError);
    EXPECT_THROW(sample_posterior(post, 0, 1), ValidationError);
}

TEST(EnsembleStatistics, MeanAndUnbiasedSigma) {
    const std::vector<std::vector<Vector>> members{
        {Vector::Constant(1, 1.0), Vector::Constant(1, 5.0)},
        {Vector::Constant(1, 3.0), Vector::Constant(1, 5.0)},
        {Vector::Constant(1, 5.0), Vector::Constant(1, 5.0)},
    };
    const UncertaintyCone cone = ensemble_statistics(members, {0.1, 0.2}, {"x"});
    EXPECT_DOUBLE_EQ(cone.mean[0](0), 3.0);
    EXPECT_DOUBLE_EQ(cone.sigma[0](0), 2.0);
    EXPECT_DOUBLE_EQ(cone.sigma[1](0), 0.0);
    EXPECT_EQ(cone.n_ensemble, 3u);
    EXPECT_THROW(ensemble_statistics({members[0]}, {0.1, 0.2}, {"x"}), ValidationError);
}

TEST(UncertaintyCones, RedrawsFailedSimulations) {
    const PosteriorApprox post =
        make_posterior(Parameters::Constant(1, 0.5), 100.0 * Matrix::Identity(1, 1), Vector::Zero(1), Vector::Ones(1));
    const EnsembleMap map = [](const Parameters& theta) {
        if (theta(0) > 0.55) throw NumericalError("synthetic failure");
        return std::vector<Vector>{theta};
    };
    const UncertaintyCone cone = uncertainty_cones(post, map, {0.1}, {"theta"}, 200, 8);
    EXPECT_EQ(cone.n_ensemble, 200u);
    EXPECT_GT(cone.failed_samples, 0u);
    EXPECT_LT(cone.mean[0](0), 0.5);

    const EnsembleMap always = [](const Parameters&) -> std::vector<Vector> { throw NumericalError("always"); };
    ConeOptions opt;
    opt.max_retries = 2;
    EXPECT_THROW(uncertainty_cones(post, always, {0.1}, {"theta"}, 10, 8, opt), NumericalError);
}

TEST(UncertaintyCones, DegeneratePosteriorGivesZeroWidth) {
    const PosteriorApprox post =
        make_posterior(Parameters::Constant(2, 0.5), 1e30 * Matrix::Identity(2, 2), Vector::Zero(2), Vector::Ones(2));
    const EnsembleMap map = [](const Parameters& theta) { return std::vector<Vector>{Vector::Constant(1, theta.sum())}; };
    const UncertaintyCone cone = uncertainty_cones(post, map, {0.1}, {"s"}, 50, 2);
    EXPECT_NEAR(cone.mean[0](0), 1.0, 1e-12);
    EXPECT_LT(cone.sigma[0](0), 1e-12);
}

}  // namespace
}  // namespace gridcal
