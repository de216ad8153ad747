#pragma once

// Random small models and a brute-force finite-difference gradient for them.

#include <random>

#include "oracles.hpp"
#include "vgpds/model.hpp"

namespace fixture {

using vgpds::Matrix;
using vgpds::Vector;

inline constexpr int kNumFamilies = 6;

inline vgpds::TemporalKernelSpec family_spec(int which, std::mt19937_64 &rng) {
    using vgpds::TemporalKernelSpec;
    std::uniform_real_distribution<double> u(0.5, 2.0);
    switch (which % kNumFamilies) {
    case 0: return TemporalKernelSpec::rbf(u(rng), 2.0 * u(rng));
    case 1: return TemporalKernelSpec::matern32(u(rng), 2.0 * u(rng));
    case 2: {
        auto p = TemporalKernelSpec::periodic(u(rng), u(rng), 4.0 * u(rng));
        p.optimize_period = true;
        return p;
    }
    case 3: return TemporalKernelSpec::sum({TemporalKernelSpec::rbf(u(rng), 3.0 * u(rng)), TemporalKernelSpec::white(0.1 * u(rng))});
    case 4: return TemporalKernelSpec::sum({TemporalKernelSpec::matern32(u(rng), 2.0 * u(rng)), TemporalKernelSpec::bias(0.5 * u(rng))});
    default: return TemporalKernelSpec::white(u(rng));
    }
}

// N x D observations, two sequences when N >= 6.
inline vgpds::VgpdsModel random_model(std::mt19937_64 &rng, int family, Eigen::Index n, Eigen::Index m,
                                      Eigen::Index q, Eigen::Index d) {
    std::vector<int> ids(static_cast<std::size_t>(n), 0);
    if (n >= 6) {
        for (Eigen::Index i = n / 2; i < n; ++i) { ids[i] = 1; }
    }
    Vector t(n);
    for (Eigen::Index i = 0; i < n; ++i) { t[i] = 0.7 * static_cast<double>(i) + 0.1 * oracle::random_matrix(rng, 1, 1)(0, 0); }
    const auto prior = vgpds::build_prior(family_spec(family, rng), t, ids);
    vgpds::VariationalState state;
    state.mu_bar = oracle::random_matrix(rng, n, q, -0.8, 0.8);
    state.lambda = oracle::random_matrix(rng, n, q, 0.3, 2.0);
    state.inducing = oracle::random_matrix(rng, m, q, -1.0, 1.0);
    const vgpds::ArdKernelParams ard(oracle::random_matrix(rng, 1, 1, 0.7, 1.5)(0, 0),
                                     oracle::random_matrix(rng, q, 1, 0.3, 1.5).col(0));
    const Matrix y = oracle::random_matrix(rng, n, d, -1.5, 1.5);
    return vgpds::assemble_model(prior, ard, oracle::random_matrix(rng, 1, 1, 2.0, 10.0)(0, 0), state, y);
}

// Central differences of the bound in raw parameter space, one evaluation pair
// per scalar. Positive parameters use relative steps.
inline vgpds::BoundGradient finite_difference_gradient(const vgpds::VgpdsModel &model, double eps = 1e-6) {
    using vgpds::evaluate_bound;
    vgpds::BoundGradient g;
    auto diff = [&](auto &&mutate, double step) {
        auto hi = model;
        auto lo = model;
        mutate(hi, step);
        mutate(lo, -step);
        return (evaluate_bound(hi).bound - evaluate_bound(lo).bound) / (2.0 * step);
    };
    const Eigen::Index n = model.num_points(), q = model.latent_dims(), m = model.num_inducing();
    g.mu_bar.resize(n, q);
    g.lambda.resize(n, q);
    g.inducing.resize(m, q);
    for (Eigen::Index j = 0; j < q; ++j) {
        for (Eigen::Index i = 0; i < n; ++i) {
            g.mu_bar(i, j) = diff([i, j](auto &x, double e) { x.state.mu_bar(i, j) += e; }, eps);
            g.lambda(i, j) = diff([i, j](auto &x, double e) { x.state.lambda(i, j) += e; },
                                  eps * model.state.lambda(i, j));
        }
        for (Eigen::Index i = 0; i < m; ++i) {
            g.inducing(i, j) = diff([i, j](auto &x, double e) { x.state.inducing(i, j) += e; }, eps);
        }
    }
    const Vector pf = model.ard.params();
    g.theta_f.resize(pf.size());
    for (Eigen::Index i = 0; i < pf.size(); ++i) {
        g.theta_f[i] = diff(
            [i, pf](auto &x, double e) {
                Vector p = pf;
                p[i] += e;
                x.ard = vgpds::ArdKernelParams(p[0], p.tail(p.size() - 1));
            },
            eps * pf[i]);
    }
    const Vector px = model.prior.spec.params();
    g.theta_x.resize(px.size());
    for (Eigen::Index i = 0; i < px.size(); ++i) {
        g.theta_x[i] = diff(
            [i, px](auto &x, double e) {
                Vector p = px;
                p[i] += e;
                x.set_temporal_kernel(x.prior.spec.with_params(p));
            },
            eps * px[i]);
    }
    g.beta = diff([](auto &x, double e) { x.beta += e; }, eps * model.beta);
    return g;
}

struct GroupErrors {
    double mu_bar, lambda, inducing, theta_f, theta_x, beta;
    double max() const { return std::max({mu_bar, lambda, inducing, theta_f, theta_x, beta}); }
};

inline GroupErrors compare(const vgpds::BoundGradient &a, const vgpds::BoundGradient &fd) {
    Matrix ab(1, 1), fb(1, 1);
    ab(0, 0) = a.beta;
    fb(0, 0) = fd.beta;
    return {oracle::scaled_error(a.mu_bar, fd.mu_bar),     oracle::scaled_error(a.lambda, fd.lambda),
            oracle::scaled_error(a.inducing, fd.inducing), oracle::scaled_error(a.theta_f, fd.theta_f),
            oracle::scaled_error(a.theta_x, fd.theta_x),   oracle::scaled_error(ab, fb)};
}

}  // namespace fixture
