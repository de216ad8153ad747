#include <cmath>
#include <random>

#include "doctest.h"
#include "oracles.hpp"
#include "vgpds/error.hpp"
#include "vgpds/temporal_prior.hpp"

using namespace vgpds;

namespace {

Vector time_grid(Eigen::Index n, double step = 1.0) {
    return Vector::LinSpaced(n, 0.0, step * static_cast<double>(n - 1));
}

}  // namespace

TEST_CASE("sequence layout from ids") {
    const auto l = SequenceLayout::from_ids({4, 4, 1, 1, 1, 7});
    REQUIRE(l.num_sequences() == 3);
    CHECK(l.ranges[1] == std::pair<Eigen::Index, Eigen::Index>(2, 5));
    CHECK(l.size() == 6);
    CHECK_THROWS_AS(SequenceLayout::from_ids({0, 1, 0}), ValidationError);
    CHECK_THROWS_AS(SequenceLayout::single(3).validate(4), ValidationError);
}

TEST_CASE("prior is block diagonal across sequences") {
    const Vector t = time_grid(7);
    const auto prior = build_prior(TemporalKernelSpec::rbf(1.0, 5.0), t, std::vector<int>{0, 0, 0, 1, 1, 1, 1});
    CHECK(prior.gram.block(0, 3, 3, 4).cwiseAbs().maxCoeff() == 0.0);
    CHECK(prior.gram.block(3, 0, 4, 3).cwiseAbs().maxCoeff() == 0.0);
    CHECK(prior.gram(0, 2) > 0.0);
    CHECK(prior.gram_grad(1).block(0, 3, 3, 4).cwiseAbs().maxCoeff() == 0.0);
    const Matrix kx = prior.cross(Vector::Constant(1, 7.0), {1});
    CHECK(kx.leftCols(3).cwiseAbs().maxCoeff() == 0.0);
    CHECK(kx(0, 6) > 0.0);
}

TEST_CASE("implied posterior matches direct inversion") {
    std::mt19937_64 rng(3);
    const Vector t = time_grid(8, 0.7);
    const auto prior = build_prior(TemporalKernelSpec::sum({TemporalKernelSpec::rbf(1.2, 2.0),
                                                            TemporalKernelSpec::white(0.2)}),
                                   t, SequenceLayout::single(8));
    const Vector mu_bar = oracle::random_matrix(rng, 8, 1).col(0);
    const Vector lambda = oracle::random_matrix(rng, 8, 1, 0.1, 3.0).col(0);
    const auto post = implied_posterior(prior.gram, mu_bar, lambda);
    const Matrix s = oracle::direct_posterior_cov(prior.gram, lambda);
    CHECK(oracle::scaled_error(post.cov, s) < 1e-10);
    CHECK((post.mean - prior.gram * mu_bar).cwiseAbs().maxCoeff() < 1e-12);
    Matrix kl_inv = prior.gram;
    kl_inv.diagonal() += lambda.cwiseInverse();
    CHECK(oracle::scaled_error(post.b_hat, kl_inv.inverse()) < 1e-10);
}

TEST_CASE("KL divergence against the dense Gaussian formula") {
    std::mt19937_64 rng(17);
    for (int trial = 0; trial < 20; ++trial) {
        const Eigen::Index n = 3 + trial % 5;
        const Vector t = oracle::random_matrix(rng, n, 1, 0.0, 5.0).col(0);
        const auto spec = TemporalKernelSpec::sum({TemporalKernelSpec::matern32(1.0, 1.5),
                                                   TemporalKernelSpec::white(0.1)});
        const auto prior = build_prior(spec, t, SequenceLayout::single(n));
        const Matrix mu_bar = oracle::random_matrix(rng, n, 2);
        const Matrix lambda = oracle::random_matrix(rng, n, 2, 0.05, 4.0);
        double expect = 0.0;
        for (Eigen::Index q = 0; q < 2; ++q) {
            const Matrix s = oracle::direct_posterior_cov(prior.gram, lambda.col(q));
            expect += oracle::dense_gaussian_kl(prior.gram * mu_bar.col(q), s, prior.gram);
        }
        const double kl = kl_q_p(prior, mu_bar, lambda);
        CHECK(kl == doctest::Approx(expect).epsilon(1e-8));
        CHECK(kl >= 0.0);
    }
}

TEST_CASE("KL is zero when q equals the prior") {
    // lambda -> 0 and mu_bar = 0 recovers N(0, K_t)
    const auto prior = build_prior(TemporalKernelSpec::rbf(1.0, 2.0), time_grid(6), SequenceLayout::single(6));
    const double kl = kl_q_p(prior, Matrix::Zero(6, 2), Matrix::Constant(6, 2, 1e-12));
    CHECK(std::abs(kl) < 1e-10);
}

TEST_CASE("KL gradients agree with central differences") {
    std::mt19937_64 rng(5);
    auto per = TemporalKernelSpec::periodic(0.6, 0.8, 5.0);
    per.optimize_period = true;
    const auto spec = TemporalKernelSpec::sum({TemporalKernelSpec::rbf(1.0, 2.0), per, TemporalKernelSpec::white(0.1)});
    const Vector t = time_grid(7, 0.9);
    const std::vector<int> ids{0, 0, 0, 0, 1, 1, 1};
    const auto prior = build_prior(spec, t, ids);
    const Matrix mu_bar = oracle::random_matrix(rng, 7, 2);
    const Matrix lambda = oracle::random_matrix(rng, 7, 2, 0.2, 2.0);
    const auto g = kl_gradients(prior, mu_bar, lambda);

    Matrix fd_mu(7, 2), fd_lam(7, 2);
    const double h = 1e-6;
    for (Eigen::Index i = 0; i < 7; ++i) {
        for (Eigen::Index q = 0; q < 2; ++q) {
            Matrix a = mu_bar, b = mu_bar;
            a(i, q) += h;
            b(i, q) -= h;
            fd_mu(i, q) = (kl_q_p(prior, a, lambda) - kl_q_p(prior, b, lambda)) / (2 * h);
            Matrix c = lambda, d = lambda;
            c(i, q) += h;
            d(i, q) -= h;
            fd_lam(i, q) = (kl_q_p(prior, mu_bar, c) - kl_q_p(prior, mu_bar, d)) / (2 * h);
        }
    }
    CHECK(oracle::scaled_error(g.d_mu_bar, fd_mu) < 1e-6);
    CHECK(oracle::scaled_error(g.d_lambda, fd_lam) < 1e-6);

    const Vector p = spec.params();
    Vector fd_theta(p.size());
    for (Eigen::Index i = 0; i < p.size(); ++i) {
        Vector hi = p, lo = p;
        const double step = 1e-6 * p[i];
        hi[i] += step;
        lo[i] -= step;
        fd_theta[i] = (kl_q_p(build_prior(spec.with_params(hi), t, ids), mu_bar, lambda) -
                       kl_q_p(build_prior(spec.with_params(lo), t, ids), mu_bar, lambda)) /
                      (2 * step);
    }
    CHECK(oracle::scaled_error(g.d_theta, fd_theta) < 1e-5);
}

TEST_CASE("implied posterior stays stable for large lambda") {
    const auto prior = build_prior(TemporalKernelSpec::rbf(1.0, 20.0), time_grid(30), SequenceLayout::single(30));
    const auto post = implied_posterior(prior.gram, Vector::Zero(30), Vector::Constant(30, 1e8));
    CHECK(post.cov.allFinite());
    CHECK(post.cov.diagonal().maxCoeff() < 1e-6);
    CHECK(post.cov.diagonal().minCoeff() > -1e-10);
}
