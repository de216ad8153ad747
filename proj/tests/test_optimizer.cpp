#include <cmath>
#include <cstring>
#include <limits>
#include <random>

#include "doctest.h"
#include "fixtures.hpp"
#include "oracles.hpp"
#include "vgpds/error.hpp"
#include "vgpds/optimizer.hpp"

using namespace vgpds;

namespace {

TrainConfig short_run(OptimizerMethod method, int iters) {
    TrainConfig tc;
    tc.method = method;
    tc.warmup_iters = 5;
    tc.schedule = {iters};
    tc.tol = 1e-12;
    return tc;
}

bool same_bits(const Matrix &a, const Matrix &b) {
    return a.rows() == b.rows() && a.cols() == b.cols() &&
           std::memcmp(a.data(), b.data(), sizeof(double) * static_cast<std::size_t>(a.size())) == 0;
}

}  // namespace

TEST_CASE("zero iterations return the model unchanged with a one-row trace") {
    std::mt19937_64 rng(1);
    const auto model = fixture::random_model(rng, 0, 8, 3, 2, 3);
    for (auto method : {OptimizerMethod::lbfgs, OptimizerMethod::scg}) {
        TrainConfig tc;
        tc.method = method;
        tc.schedule = {0};
        const auto res = train(model, tc);
        REQUIRE(res.trace.size() == 1);
        CHECK(res.trace[0].iteration == 0);
        CHECK(res.trace[0].bound == evaluate_bound(model).bound);
        CHECK(same_bits(res.model.state.mu_bar, model.state.mu_bar));
        CHECK(same_bits(res.model.state.lambda, model.state.lambda));
        CHECK(res.model.beta == model.beta);
    }
}

TEST_CASE("accepted bound never decreases and reruns are bitwise identical") {
    std::mt19937_64 rng(2);
    for (int family = 0; family < fixture::kNumFamilies; ++family) {
        const auto model = fixture::random_model(rng, family, 10, 4, 2, 3);
        for (auto method : {OptimizerMethod::lbfgs, OptimizerMethod::scg}) {
            const auto a = train(model, short_run(method, 40));
            const auto b = train(model, short_run(method, 40));
            CAPTURE(family);
            CAPTURE(method_name(method));
            REQUIRE(a.trace.size() >= 2);
            for (std::size_t i = 1; i < a.trace.size(); ++i) {
                CHECK(a.trace[i].bound >= a.trace[i - 1].bound - 1e-9);
                CHECK(a.trace[i].iteration == a.trace[i - 1].iteration + 1);
            }
            CHECK(a.trace.back().bound > a.trace.front().bound);
            REQUIRE(a.trace.size() == b.trace.size());
            for (std::size_t i = 0; i < a.trace.size(); ++i) { CHECK(a.trace[i].bound == b.trace[i].bound); }
            CHECK(same_bits(a.model.state.mu_bar, b.model.state.mu_bar));
            CHECK(same_bits(a.model.state.inducing, b.model.state.inducing));
        }
    }
}

TEST_CASE("warmup keeps beta fixed and frozen groups stay put") {
    std::mt19937_64 rng(3);
    const auto model = fixture::random_model(rng, 1, 9, 3, 2, 2);
    TrainConfig warm;
    warm.warmup_iters = 20;
    warm.schedule = {0};
    const auto w = train(model, warm);
    CHECK(w.model.beta == model.beta);
    CHECK_FALSE(same_bits(w.model.state.mu_bar, model.state.mu_bar));

    TrainConfig tc = short_run(OptimizerMethod::lbfgs, 30);
    tc.frozen = parse_groups("inducing,theta_x");
    const auto r = train(model, tc);
    CHECK(same_bits(r.model.state.inducing, model.state.inducing));
    CHECK(r.model.prior.spec.params() == model.prior.spec.params());
    CHECK_FALSE(same_bits(r.model.state.lambda, model.state.lambda));
    CHECK(r.model.beta != model.beta);
}

TEST_CASE("gradcheck passes for every family and excludes frozen groups") {
    std::mt19937_64 rng(4);
    for (int family = 0; family < fixture::kNumFamilies; ++family) {
        const auto model = fixture::random_model(rng, family, 10, 4, 2, 3);
        const auto rep = gradcheck(model, 1e-6, 7);
        CAPTURE(family);
        CHECK(rep.max_rel_error() < 1e-5);
        const auto again = gradcheck(model, 1e-6, 7);
        CHECK(again.max_rel_error() == rep.max_rel_error());

        const auto part = gradcheck(model, 1e-6, 7, {ParamGroup::beta, ParamGroup::inducing});
        for (const auto &g : part.groups) {
            const bool frozen = g.group == ParamGroup::beta || g.group == ParamGroup::inducing;
            CHECK(g.excluded == frozen);
            if (frozen) { CHECK(g.checked == 0); }
        }
    }
}

TEST_CASE("optimizing only mu_bar and lambda reaches the stationarity relations") {
    // At a stationary point of F over (mu_bar, lambda): dF^/dmu = mu_bar and
    // dF^/dS_nn = -lambda_n / 2, with F^ the data term as a function of the
    // marginal moments. The oracle differentiates the explicit-W data term.
    std::mt19937_64 rng(5);
    auto model = fixture::random_model(rng, 0, 7, 3, 2, 2);
    TrainConfig tc;
    tc.schedule = {3000};
    tc.tol = 1e-14;
    tc.frozen = {ParamGroup::inducing, ParamGroup::theta_f, ParamGroup::theta_x, ParamGroup::beta};
    const auto res = train(model, tc);
    const auto &m = res.model;

    const auto posts = implied_posteriors(m.prior, m.state);
    std::vector<Eigen::Index> rows(7);
    for (Eigen::Index i = 0; i < 7; ++i) { rows[i] = i; }
    const MomentSet mo = moments_for_rows(posts, rows);
    Matrix kmm = ard_gram(m.ard, m.state.inducing, m.state.inducing);
    kmm.diagonal().array() += evaluate_bound(m).kmm_jitter;
    auto data_term = [&](const MomentSet &x) {
        const auto psi = psi_stats(m.ard, x, m.state.inducing);
        return oracle::direct_data_term(m.y, m.beta, psi.psi0, psi.psi1, psi.psi2, kmm);
    };
    double worst_mean = 0.0, worst_var = 0.0;
    for (Eigen::Index q = 0; q < 2; ++q) {
        for (Eigen::Index i = 0; i < 7; ++i) {
            const double gm = oracle::central_difference(
                [&](double e) {
                    MomentSet x = mo;
                    x.mean(i, q) += e;
                    return data_term(x);
                },
                0.0, 1e-5);
            const double gv = oracle::central_difference(
                [&](double e) {
                    MomentSet x = mo;
                    x.var(i, q) += e * mo.var(i, q);
                    return data_term(x);
                },
                0.0, 1e-5) / mo.var(i, q);
            worst_mean = std::max(worst_mean, std::abs(gm - m.state.mu_bar(i, q)) / (1.0 + std::abs(gm)));
            const double lam = m.state.lambda(i, q);
            worst_var = std::max(worst_var, std::abs(-2.0 * gv - lam) / (1.0 + lam));
        }
    }
    CHECK(worst_mean < 1e-4);
    CHECK(worst_var < 1e-4);
}

TEST_CASE("parameter map round trips and counts lambda clamps") {
    std::mt19937_64 rng(6);
    auto model = fixture::random_model(rng, 3, 8, 3, 2, 2);
    const ParameterMap map(model, {});
    const Vector x = map.pack(model);
    auto copy = model;
    CHECK(map.unpack(x, copy) == 0);
    CHECK((copy.state.mu_bar - model.state.mu_bar).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((copy.state.lambda - model.state.lambda).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(copy.beta == doctest::Approx(model.beta).epsilon(1e-14));

    Vector low = x;
    const auto [a, b] = map.range(ParamGroup::lambda);
    low.segment(a, 3).setConstant(std::log(kLambdaFloor) - 5.0);
    CHECK(map.unpack(low, copy) == 3);
    CHECK(copy.state.lambda.minCoeff() == kLambdaFloor);
    CHECK(b - a == model.state.lambda.size());

    const ParameterMap partial(model, {ParamGroup::mu_bar, ParamGroup::lambda});
    CHECK(partial.size() == x.size() - 2 * model.state.mu_bar.size());
    const auto [c, d] = partial.range(ParamGroup::mu_bar);
    CHECK(c == d);
}

TEST_CASE("group names, methods and configuration validation") {
    CHECK(parse_groups("").empty());
    CHECK(parse_groups("beta,theta_x") == std::set<ParamGroup>{ParamGroup::beta, ParamGroup::theta_x});
    for (auto g : kAllGroups) { CHECK(group_from_name(group_name(g)) == g); }
    CHECK_THROWS_AS(parse_groups("beta,nope"), ValidationError);
    CHECK(method_from_name("scg") == OptimizerMethod::scg);
    CHECK_THROWS_AS(method_from_name("adam"), ValidationError);

    TrainConfig bad;
    bad.tol = 0.0;
    CHECK_THROWS_AS(bad.validate(), ValidationError);
    bad = TrainConfig{};
    bad.schedule = {10, -1};
    CHECK_THROWS_AS(bad.validate(), ValidationError);
    bad = TrainConfig{};
    bad.warmup_iters = -3;
    CHECK_THROWS_AS(bad.validate(), ValidationError);
}

TEST_CASE("a starting point with a non-finite bound is rejected") {
    std::mt19937_64 rng(8);
    auto model = fixture::random_model(rng, 0, 6, 3, 2, 2);
    model.state.mu_bar(0, 0) = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS(train(model, TrainConfig{}));
}
