// SPDX-License-Identifier: Apache-2.0
#include "gridcal/posterior.hpp"

#include <atomic>
#include <cmath>
#include <limits>

#include <Eigen/Eigenvalues>
#include <nlohmann/json.hpp>

#include "gridcal/csv.hpp"
#include "gridcal/error.hpp"
#include "gridcal/parallel.hpp"
#include "gridcal/random.hpp"

namespace gridcal {

namespace {

constexpr std::uint64_t kProbeStream = std::numeric_limits<std::uint64_t>::max();

std::vector<double> to_std(const Vector& v) { return {v.data(), v.data() + v.size()}; }

class Drawer {
public:
    Drawer(const PosteriorApprox& post, const SamplingOptions& options)
        : post_(post), upper_(post.factor.transpose()), sqrt_lambda_(std::sqrt(post.inflation)),
          half_width_(options.box_sigmas * post.marginal_sigmas) {}

    Parameters draw(Rng& rng, NormalSampler& normal) const {
        const Eigen::Index n = post_.theta_map.size();
        Vector z(n);
        for (Eigen::Index i = 0; i < n; ++i) z(i) = normal(rng);
        Vector theta = post_.theta_map + upper_.triangularView<Eigen::Upper>().solve(z);
        if (sqrt_lambda_ > 0.0) {
            for (Eigen::Index i = 0; i < n; ++i) theta(i) += sqrt_lambda_ * normal(rng);
        }
        return theta;
    }

    bool accept(const Parameters& theta) const {
        return (theta.array() >= post_.lower.array()).all() && (theta.array() <= post_.upper.array()).all() &&
               ((theta - post_.theta_map).array().abs() <= half_width_.array()).all();
    }

private:
    const PosteriorApprox& post_;
    Matrix upper_;
    double sqrt_lambda_;
    Vector half_width_;
};

Parameters draw_accepted(const Drawer& drawer, std::uint64_t stream_seed, std::size_t max_attempts) {
    Rng rng(stream_seed);
    NormalSampler normal;
    for (std::size_t attempt = 0; attempt < max_attempts; ++attempt) {
        Parameters theta = drawer.draw(rng, normal);
        if (drawer.accept(theta)) return theta;
    }
    throw SamplingError("posterior sampling: no accepted draw after " + std::to_string(max_attempts) + " attempts",
                        0.0);
}

void check_acceptance(const Drawer& drawer, std::uint64_t seed, const SamplingOptions& options) {
    if (options.probe_batch == 0) return;
    Rng rng(derive_seed(seed, {kProbeStream}));
    NormalSampler normal;
    std::size_t accepted = 0;
    for (std::size_t i = 0; i < options.probe_batch; ++i) {
        if (drawer.accept(drawer.draw(rng, normal))) ++accepted;
    }
    const double rate = static_cast<double>(accepted) / static_cast<double>(options.probe_batch);
    if (rate < options.min_acceptance) {
        throw SamplingError("posterior sampling: acceptance rate " + format_number(rate) + " after a probe of " +
                                std::to_string(options.probe_batch) + " draws",
                            rate);
    }
}

}  // namespace

Matrix PosteriorApprox::covariance() const {
    const Eigen::Index n = information.rows();
    Matrix cov = information.llt().solve(Matrix::Identity(n, n));
    cov.diagonal().array() += inflation;
    return cov;
}

PosteriorApprox make_posterior(const Parameters& theta_map, const Matrix& information, const Vector& lower,
                               const Vector& upper) {
    const Eigen::Index n = theta_map.size();
    if (information.rows() != n || information.cols() != n || lower.size() != n || upper.size() != n) {
        throw ValidationError("posterior: θ_MAP, information matrix and bounds differ in dimension");
    }
    PosteriorApprox post;
    post.theta_map = theta_map;
    post.information = 0.5 * (information + information.transpose());
    Eigen::LLT<Matrix> llt(post.information);
    if (llt.info() != Eigen::Success) {
        const double smallest = Eigen::SelfAdjointEigenSolver<Matrix>(post.information, Eigen::EigenvaluesOnly)
                                    .eigenvalues()
                                    .minCoeff();
        throw SingularMatrixError("posterior information matrix is not positive definite (smallest eigenvalue " +
                                      format_number(smallest) + ")",
                                  smallest);
    }
    post.factor = llt.matrixL();
    // diag(information⁻¹) = squared column norms of L⁻¹.
    const Matrix l_inv = post.factor.triangularView<Eigen::Lower>().solve(Matrix::Identity(n, n));
    post.base_sigmas = l_inv.colwise().norm().transpose();
    post.marginal_sigmas = post.base_sigmas;
    post.lower = lower;
    post.upper = upper;
    return post;
}

PosteriorApprox build_posterior(const Parameters& theta_map, const ObservationSet& obs, const TruncatedGaussian& prior,
                                const ForwardModel& forward) {
    if (!prior.contains(theta_map)) throw ValidationError("build_posterior: θ_MAP lies outside the prior box");
    obs.validate();
    const ForwardEvaluation eval = forward.evaluate(theta_map, true);
    if (eval.jacobians.size() != obs.data.size()) {
        throw ValidationError("build_posterior: forward model and observations differ in instant count");
    }
    const Vector inv_r = obs.noise_variance.cwiseInverse();
    Matrix information = prior.precision();
    for (const Matrix& j : eval.jacobians) information.noalias() += j.transpose() * inv_r.asDiagonal() * j;
    return make_posterior(theta_map, information, prior.lower(), prior.upper());
}

PosteriorApprox inflate(const PosteriorApprox& post, double lambda) {
    if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw ValidationError("inflate: λ must be finite and >= 0");
    PosteriorApprox out = post;
    out.inflation = lambda;
    out.marginal_sigmas = (post.base_sigmas.array().square() + lambda).sqrt().matrix();
    return out;
}

std::vector<Parameters> sample_posterior(const PosteriorApprox& post, std::size_t n_samples, std::uint64_t seed,
                                         const SamplingOptions& options) {
    if (n_samples < 1) throw ValidationError("sample_posterior: need at least one sample");
    const Drawer drawer(post, options);
    check_acceptance(drawer, seed, options);
    std::vector<Parameters> samples(n_samples);
    parallel_for(n_samples, resolve_jobs(options.jobs), [&](std::size_t i) {
        samples[i] = draw_accepted(drawer, derive_seed(seed, {i}), options.max_attempts_per_sample);
    });
    return samples;
}

UncertaintyCone ensemble_statistics(const std::vector<std::vector<Vector>>& members, std::vector<double> times,
                                    std::vector<std::string> channels) {
    if (members.size() < 2) throw ValidationError("uncertainty cone: need at least two ensemble members");
    const std::size_t n_times = times.size();
    UncertaintyCone cone;
    cone.times = std::move(times);
    cone.channels = std::move(channels);
    cone.n_ensemble = members.size();
    for (const auto& m : members) {
        if (m.size() != n_times) throw ValidationError("uncertainty cone: ensemble member has the wrong length");
    }
    for (std::size_t k = 0; k < n_times; ++k) {
        const Eigen::Index width = members.front()[k].size();
        if (static_cast<std::size_t>(width) != cone.channels.size()) {
            throw ValidationError("uncertainty cone: " + std::to_string(cone.channels.size()) + " channel names for " +
                                  std::to_string(width) + " values");
        }
        // Welford: identical members give exactly zero spread.
        Vector mean = Vector::Zero(width);
        Vector m2 = Vector::Zero(width);
        for (std::size_t e = 0; e < members.size(); ++e) {
            const Vector& x = members[e][k];
            if (x.size() != width) throw ValidationError("uncertainty cone: ensemble members differ in width");
            const Vector delta = x - mean;
            mean += delta / static_cast<double>(e + 1);
            m2 += delta.cwiseProduct(x - mean);
        }
        cone.mean.push_back(std::move(mean));
        cone.sigma.push_back((m2 / static_cast<double>(members.size() - 1)).cwiseMax(0.0).cwiseSqrt());
    }
    return cone;
}

UncertaintyCone uncertainty_cones(const PosteriorApprox& post, const EnsembleMap& map, std::vector<double> times,
                                  std::vector<std::string> channels, std::size_t n_samples, std::uint64_t seed,
                                  const ConeOptions& options) {
    if (n_samples < 2) throw ValidationError("uncertainty_cones: need at least two samples");
    const Drawer drawer(post, options.sampling);
    check_acceptance(drawer, seed, options.sampling);

    std::vector<std::vector<Vector>> members(n_samples);
    std::atomic<std::size_t> failures{0};
    parallel_for(n_samples, resolve_jobs(options.sampling.jobs), [&](std::size_t i) {
        for (int retry = 0;; ++retry) {
            const std::uint64_t stream = retry == 0 ? derive_seed(seed, {i}) : derive_seed(seed, {i, static_cast<std::uint64_t>(retry)});
            const Parameters theta = draw_accepted(drawer, stream, options.sampling.max_attempts_per_sample);
            try {
                members[i] = map(theta);
                return;
            } catch (const NumericalError&) {
                ++failures;
                if (retry >= options.max_retries) throw;
            }
        }
    });
    UncertaintyCone cone = ensemble_statistics(members, std::move(times), std::move(channels));
    cone.failed_samples = failures.load();
    return cone;
}

std::string posterior_to_json(const PosteriorApprox& post) {
    nlohmann::json j;
    j["theta_map"] = to_std(post.theta_map);
    j["marginal_sigmas"] = to_std(post.marginal_sigmas);
    j["base_sigmas"] = to_std(post.base_sigmas);
    j["inflation_lambda"] = post.inflation;
    j["lower"] = to_std(post.lower);
    j["upper"] = to_std(post.upper);
    return j.dump(2) + "\n";
}

void write_factor_csv(const std::filesystem::path& path, const PosteriorApprox& post) {
    CsvTable table;
    for (Eigen::Index c = 0; c < post.factor.cols(); ++c) table.header.push_back("c" + std::to_string(c));
    for (Eigen::Index r = 0; r < post.factor.rows(); ++r) {
        std::vector<std::string> row;
        for (Eigen::Index c = 0; c < post.factor.cols(); ++c) row.push_back(format_number(post.factor(r, c)));
        table.rows.push_back(std::move(row));
    }
    write_csv(path, table);
}

void write_cone_csv(const std::filesystem::path& path, const UncertaintyCone& cone) {
    CsvTable table;
    table.header = {"time", "channel", "mean", "sigma"};
    for (std::size_t k = 0; k < cone.times.size(); ++k) {
        for (std::size_t c = 0; c < cone.channels.size(); ++c) {
            const auto ci = static_cast<Eigen::Index>(c);
            table.rows.push_back({format_number(cone.times[k]), cone.channels[c], format_number(cone.mean[k](ci)),
                                  format_number(cone.sigma[k](ci))});
        }
    }
    write_csv(path, table);
}

}  // namespace gridcal
