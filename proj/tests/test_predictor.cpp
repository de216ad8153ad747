#include <cmath>
#include <random>

#include "doctest.h"
#include "fixtures.hpp"
#include "oracles.hpp"
#include "vgpds/error.hpp"
#include "vgpds/predictor.hpp"
#include "vgpds/synth.hpp"

using namespace vgpds;

namespace {

Vector probe_times(const VgpdsModel &model, Eigen::Index count) {
    Vector t(count);
    const double lo = model.prior.times.minCoeff(), hi = model.prior.times.maxCoeff();
    for (Eigen::Index i = 0; i < count; ++i) {
        t[i] = lo - 1.0 + (hi - lo + 2.0) * static_cast<double>(i) / static_cast<double>(count - 1);
    }
    return t;
}

Matrix columns(const Matrix &y, const std::vector<int> &cols) {
    Matrix out(y.rows(), static_cast<Eigen::Index>(cols.size()));
    for (std::size_t j = 0; j < cols.size(); ++j) { out.col(static_cast<Eigen::Index>(j)) = y.col(cols[j]); }
    return out;
}

}  // namespace

TEST_CASE("zero mu_bar forecasts a zero latent mean") {
    std::mt19937_64 rng(1);
    auto model = fixture::random_model(rng, 1, 5, 3, 2, 2);
    model.state.mu_bar.setZero();
    const auto f = forecast_latent(model, probe_times(model, 9), 0);
    CHECK(f.mean.cwiseAbs().maxCoeff() == 0.0);
    CHECK(f.var.minCoeff() > 0.0);
}

TEST_CASE("latent forecast is GP regression with pseudo-targets") {
    // q(x_q) is the posterior of a GP observed with noise variance 1/lambda at
    // targets (K_t + Lambda^-1) mu_bar; forecasting is that regression at t*.
    std::mt19937_64 rng(2);
    for (int family = 0; family < 5; ++family) {
        const auto model = fixture::random_model(rng, family, 5, 3, 2, 2);
        const Vector ts = probe_times(model, 7);
        const auto f = forecast_latent(model, ts, 0);
        const Matrix &k = model.prior.gram;
        const Matrix ks = temporal_gram(model.prior.spec, ts, model.prior.times);
        const Vector kss = temporal_gram(model.prior.spec, ts, ts).diagonal();
        for (Eigen::Index q = 0; q < 2; ++q) {
            const Vector noise = model.state.lambda.col(q).cwiseInverse();
            const Vector target = k * model.state.mu_bar.col(q) + noise.cwiseProduct(model.state.mu_bar.col(q));
            const auto [mean, var] = oracle::gp_regression(k, ks, kss, target, noise);
            CAPTURE(family);
            CHECK(oracle::scaled_error(mean, f.mean.col(q)) < 1e-8);
            CHECK(oracle::scaled_error(var, f.var.col(q)) < 1e-8);
        }
    }
}

TEST_CASE("forecast variance vanishes on the grid as lambda grows and shrinks monotonically") {
    std::mt19937_64 rng(3);
    auto model = fixture::random_model(rng, 1, 5, 3, 1, 2);
    const Vector on_grid = model.prior.times;
    std::vector<double> probe;
    for (double lam : {0.1, 1.0, 10.0, 1e3, 1e6, 1e10}) {
        model.state.lambda.setConstant(lam);
        const auto f = forecast_latent(model, on_grid, 0);
        CHECK(f.var.minCoeff() >= 0.0);
        probe.push_back(f.var(2, 0));
        if (lam == 1e10) { CHECK(f.var.maxCoeff() < 1e-8); }
    }
    for (std::size_t i = 1; i < probe.size(); ++i) { CHECK(probe[i] <= probe[i - 1]); }
}

TEST_CASE("zero data forecasts zero outputs and variances respect the noise floor") {
    std::mt19937_64 rng(4);
    auto model = fixture::random_model(rng, 0, 8, 4, 2, 3);
    const Vector ts = probe_times(model, 6);
    const auto out = forecast_outputs(model, ts, 1);
    CHECK(out.var.minCoeff() >= 1.0 / model.beta);
    CHECK(out.mean.rows() == 6);
    CHECK(out.columns == std::vector<int>{0, 1, 2});

    auto zero = assemble_model(model.prior, model.ard, model.beta, model.state, Matrix::Zero(8, 3));
    const auto z = forecast_outputs(zero, ts, 1);
    CHECK(z.mean.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("near-delta latents give the dense sparse-GP posterior mean") {
    // With q(X) and q(X*) nearly deterministic the Psi statistics become
    // kernel matrices and E(F*) = beta K_*M (K_MM + beta K_MN K_NM)^-1 K_MN Y.
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 4; ++trial) {
        auto model = fixture::random_model(rng, 1, 7, 4, 2, 3);
        model.state.lambda.setConstant(1e10);
        model.offset.setZero();
        const Vector ts = model.prior.times.head(3);
        const auto out = forecast_outputs(model, ts, 0);
        const auto posts = implied_posteriors(model.prior, model.state);
        Matrix x(7, 2);
        for (Eigen::Index q = 0; q < 2; ++q) { x.col(q) = posts[q].mean; }
        const Matrix &z = model.state.inducing;
        const Matrix knm = ard_gram(model.ard, x, z);
        Matrix kmm = ard_gram(model.ard, z, z);
        kmm.diagonal().array() += evaluate_bound(model).kmm_jitter;
        const Matrix sigma = (kmm + model.beta * knm.transpose() * knm).inverse();
        const Matrix expect =
            model.beta * ard_gram(model.ard, out.latent.mean, z) * sigma * knm.transpose() * model.y;
        CHECK(out.latent.var.maxCoeff() < 1e-8);
        CHECK(oracle::scaled_error(expect, out.mean) < 1e-6);
    }
}

TEST_CASE("reconstruction with zero iterations is the plain forecast") {
    std::mt19937_64 rng(6);
    const auto model = fixture::random_model(rng, 0, 8, 4, 2, 4);
    const Vector ts = probe_times(model, 5);
    ReconstructConfig rc;
    rc.optimizer.schedule = {0};
    const std::vector<int> observed{0, 2};
    const Matrix yobs = oracle::random_matrix(rng, 5, 2);
    const auto rec = reconstruct_missing(model, ts, yobs, observed, rc);
    const auto fo = forecast_outputs(model, ts, kNewSequence);
    CHECK_FALSE(rec.optimized);
    CHECK(rec.missing == std::vector<int>{1, 3});
    CHECK(rec.moments.columns == std::vector<int>{1, 3});
    CHECK((rec.moments.mean - columns(fo.mean, {1, 3})).cwiseAbs().maxCoeff() == 0.0);
    CHECK((rec.moments.var - columns(fo.var, {1, 3})).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("nothing missing gives an empty result without optimizing") {
    std::mt19937_64 rng(7);
    const auto model = fixture::random_model(rng, 0, 6, 3, 2, 2);
    const Vector ts = probe_times(model, 3);
    const auto rec = reconstruct_missing(model, ts, Matrix::Zero(3, 2), {0, 1}, ReconstructConfig{});
    CHECK(rec.missing.empty());
    CHECK(rec.moments.mean.cols() == 0);
    CHECK(rec.trace.empty());
    CHECK_FALSE(rec.optimized);
}

TEST_CASE("reconstruction rejects malformed requests") {
    std::mt19937_64 rng(8);
    const auto model = fixture::random_model(rng, 0, 6, 3, 2, 3);
    const Vector ts = probe_times(model, 3);
    const ReconstructConfig rc;
    CHECK_THROWS_AS(reconstruct_missing(model, ts, Matrix::Zero(3, 0), {}, rc), ValidationError);
    CHECK_THROWS_AS(reconstruct_missing(model, ts, Matrix::Zero(3, 2), {2, 0}, rc), ValidationError);
    CHECK_THROWS_AS(reconstruct_missing(model, ts, Matrix::Zero(3, 2), {1, 1}, rc), ValidationError);
    CHECK_THROWS_AS(reconstruct_missing(model, ts, Matrix::Zero(3, 1), {0, 1}, rc), ValidationError);
    CHECK_THROWS_AS(reconstruct_missing(model, ts, Matrix::Zero(3, 1), {3}, rc), ValidationError);
    Vector bad = ts;
    bad[1] = std::nan("");
    CHECK_THROWS_AS(reconstruct_missing(model, bad, Matrix::Zero(3, 1), {0}, rc), ValidationError);
    CHECK_THROWS_AS(forecast_latent(model, ts, 7), ValidationError);
}

TEST_CASE("a copied training row is reconstructed to within the noise level") {
    SynthConfig sc;
    sc.seed = 11;
    sc.n = 30;
    sc.d = 5;
    sc.temporal = TemporalKernelSpec::rbf(1.0, 4.0);
    sc.beta = 1e4;
    const auto sample = synth_generate(sc);
    ModelConfig mc;
    mc.latent_dims = 2;
    mc.temporal = TemporalKernelSpec::rbf(1.0, 4.0);
    const auto model = make_model(sample.data, mc);
    TrainConfig tc;
    tc.warmup_iters = 50;
    tc.schedule = {400};
    const auto trained = train(model, tc).model;
    REQUIRE(trained.beta > 1e3);

    const std::vector<int> observed{0, 2, 3};
    for (Eigen::Index row : {7, 18}) {
        Vector ts(1);
        ts[0] = sample.data.t[row];
        ReconstructConfig rc;
        rc.sequence = 0;
        rc.optimizer.schedule = {100};
        const auto rec = reconstruct_missing(trained, ts, columns(sample.data.y.row(row), observed), observed, rc);
        const Matrix truth = columns(sample.data.y.row(row), {1, 4});
        CAPTURE(row);
        CHECK((rec.moments.mean - truth).cwiseAbs().maxCoeff() < 3.0 / std::sqrt(trained.beta));
    }
}
