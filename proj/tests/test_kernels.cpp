#include <cmath>
#include <random>

#include "doctest.h"
#include "oracles.hpp"
#include "vgpds/error.hpp"
#include "vgpds/kernels.hpp"

using namespace vgpds;

namespace {

Vector vec(std::initializer_list<double> v) {
    Vector out(static_cast<Eigen::Index>(v.size()));
    Eigen::Index i = 0;
    for (double x : v) { out[i++] = x; }
    return out;
}

std::vector<TemporalKernelSpec> all_families() {
    auto per = TemporalKernelSpec::periodic(1.3, 0.7, 4.5);
    per.optimize_period = true;
    return {TemporalKernelSpec::rbf(1.5, 2.0),
            TemporalKernelSpec::matern32(0.8, 1.7),
            per,
            TemporalKernelSpec::white(0.3),
            TemporalKernelSpec::bias(0.9),
            TemporalKernelSpec::sum({TemporalKernelSpec::rbf(1.0, 3.0), TemporalKernelSpec::periodic(0.5, 1.1, 6.0),
                                     TemporalKernelSpec::white(0.1), TemporalKernelSpec::bias(0.2)})};
}

}  // namespace

TEST_CASE("temporal kernel values at hand-checked points") {
    const Vector t0 = vec({3.0});
    CHECK(temporal_gram(TemporalKernelSpec::rbf(1.0, 0.4), t0, t0)(0, 0) == doctest::Approx(1.0));
    // exp(-1/2) evaluated independently: 0.6065306597126334
    CHECK(temporal_gram(TemporalKernelSpec::rbf(1.0, 1.0), vec({0.0}), vec({1.0}))(0, 0) ==
          doctest::Approx(0.6065306597126334).epsilon(1e-15));
    CHECK(temporal_gram(TemporalKernelSpec::periodic(2.0, 0.3, 5.0), vec({1.0}), vec({6.0}))(0, 0) ==
          doctest::Approx(2.0).epsilon(1e-12));
    CHECK(temporal_gram(TemporalKernelSpec::matern32(1.0, 2.0), t0, t0)(0, 0) == doctest::Approx(1.0));
}

TEST_CASE("periodic lengthscale enters linearly") {
    const auto k = TemporalKernelSpec::periodic(1.0, 0.5, 8.0);
    const double s = std::sin(2.0 * M_PI * 1.0 / 8.0);
    CHECK(k(0.0, 1.0) == doctest::Approx(std::exp(-0.5 * s * s / 0.5)).epsilon(1e-14));
}

TEST_CASE("white kernel only on identical time stamps") {
    const auto k = temporal_gram(TemporalKernelSpec::white(0.7), vec({1, 2, 3}), vec({2, 5}));
    CHECK(k(1, 0) == 0.7);
    CHECK(k.sum() == doctest::Approx(0.7));
}

TEST_CASE("ARD kernel values") {
    Matrix a(1, 1), b(1, 1);
    a << 0.0;
    b << 1.0;
    CHECK(ard_gram(ArdKernelParams(1.0, vec({2.0})), a, b)(0, 0) == doctest::Approx(0.36787944117144233).epsilon(1e-15));
    std::mt19937_64 rng(4);
    const Matrix xa = oracle::random_matrix(rng, 4, 3);
    const Matrix xb = oracle::random_matrix(rng, 5, 3);
    const Matrix k0 = ard_gram(ArdKernelParams(2.5, Vector::Zero(3)), xa, xb);
    CHECK((k0.array() == 2.5).all());
    const Matrix kk = ard_gram(ArdKernelParams(2.5, vec({1, 2, 3})), xa, xa);
    CHECK(kk.diagonal().isApproxToConstant(2.5));
}

TEST_CASE("shape and domain errors") {
    Matrix a(2, 2);
    a.setZero();
    Matrix b(2, 3);
    b.setZero();
    CHECK_THROWS_AS(ard_gram(ArdKernelParams(1.0, vec({1, 1})), a, b), ValidationError);
    CHECK_THROWS_AS(temporal_gram(TemporalKernelSpec::rbf(-1.0, 1.0), vec({1}), vec({1})), ValidationError);
    CHECK_THROWS_AS(temporal_gram(TemporalKernelSpec::rbf(1.0, 0.0), vec({1}), vec({1})), ValidationError);
    CHECK_THROWS_AS(TemporalKernelSpec::sum({}).validate(), ValidationError);
    CHECK_THROWS_AS(TemporalKernelSpec::sum({TemporalKernelSpec::sum({TemporalKernelSpec::bias(1)})}).validate(),
                    ValidationError);
    CHECK_THROWS_AS(temporal_gram_grad(TemporalKernelSpec::rbf(1, 1), vec({1}), vec({1}), 2), ValidationError);
    CHECK_THROWS_AS(ard_gram_grad(ArdKernelParams(1.0, vec({1})), a.leftCols(1), a.leftCols(1), 5),
                    ValidationError);
}

TEST_CASE("gram matrices are symmetric, PSD after jitter and stationary") {
    std::mt19937_64 rng(11);
    const Vector t = oracle::random_matrix(rng, 12, 1, 0.0, 10.0).col(0);
    for (const auto &spec : all_families()) {
        const Matrix k = temporal_gram(spec, t, t);
        CHECK((k - k.transpose()).cwiseAbs().maxCoeff() < 1e-15);
        CHECK_NOTHROW(jittered_cholesky(k, "test"));
        const Matrix shifted = temporal_gram(spec, (t.array() + 7.25).matrix(), (t.array() + 7.25).matrix());
        CHECK((shifted - k).cwiseAbs().maxCoeff() < 1e-9);
    }
    const Matrix x = oracle::random_matrix(rng, 10, 3);
    const ArdKernelParams ard(1.7, vec({0.5, 2.0, 0.0}));
    const Matrix k = ard_gram(ard, x, x);
    CHECK((k - k.transpose()).cwiseAbs().maxCoeff() < 1e-15);
    CHECK_NOTHROW(jittered_cholesky(k, "test"));
    const Matrix xs = x.rowwise() + Eigen::RowVector3d(1.0, -2.0, 0.5);
    CHECK((ard_gram(ard, xs, xs) - k).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("sum kernel gram is the sum of its components") {
    const auto spec = all_families().back();
    const Vector t = vec({0.5, 1.0, 2.5, 4.0});
    Matrix expect = Matrix::Zero(4, 4);
    for (const auto &c : spec.components) { expect += temporal_gram(c, t, t); }
    CHECK((temporal_gram(spec, t, t) - expect).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("hyperparameter derivatives: special cases") {
    const Vector t = vec({2.0});
    CHECK(temporal_gram_grad(TemporalKernelSpec::rbf(3.0, 1.5), t, t, 0)(0, 0) == doctest::Approx(1.0));
    Matrix x(1, 2);
    x << 0.3, -0.4;
    CHECK(ard_gram_grad(ArdKernelParams(1.0, vec({1, 1})), x, x, 1)(0, 0) == 0.0);
    // RBF d/dl at sigma2 = 1, l = 1, distance 1 vs a central difference
    const auto f = [](double l) { return TemporalKernelSpec::rbf(1.0, l)(0.0, 1.0); };
    const double fd = oracle::central_difference(f, 1.0, 1e-6);
    const double an = temporal_gram_grad(TemporalKernelSpec::rbf(1.0, 1.0), vec({0.0}), vec({1.0}), 1)(0, 0);
    CHECK(std::abs(an - fd) / std::abs(fd) < 1e-6);
}

TEST_CASE("hyperparameter derivatives agree with central differences") {
    std::mt19937_64 rng(21);
    for (int trial = 0; trial < 10; ++trial) {
        const Vector ta = oracle::random_matrix(rng, 5, 1, 0.0, 6.0).col(0);
        Vector tb = oracle::random_matrix(rng, 4, 1, 0.0, 6.0).col(0);
        tb[0] = ta[1];
        for (const auto &spec : all_families()) {
            const Vector p = spec.params();
            for (Eigen::Index i = 0; i < spec.num_params(); ++i) {
                const Matrix an = temporal_gram_grad(spec, ta, tb, i);
                const double h = 1e-6 * p[i];
                Vector lo = p, hi = p;
                lo[i] -= h;
                hi[i] += h;
                const Matrix fd =
                    (temporal_gram(spec.with_params(hi), ta, tb) - temporal_gram(spec.with_params(lo), ta, tb)) /
                    (2.0 * h);
                CHECK(oracle::scaled_error(an, fd) < 1e-5);
            }
        }
        const ArdKernelParams ard(1.4, oracle::random_matrix(rng, 3, 1, 0.2, 2.0).col(0));
        const Matrix xa = oracle::random_matrix(rng, 5, 3);
        const Matrix xb = oracle::random_matrix(rng, 4, 3);
        const Vector p = ard.params();
        for (Eigen::Index i = 0; i < ard.num_params(); ++i) {
            Vector lo = p, hi = p;
            lo[i] -= 1e-6;
            hi[i] += 1e-6;
            auto make = [](const Vector &v) { return ArdKernelParams(v[0], v.tail(v.size() - 1)); };
            const Matrix fd = (ard_gram(make(hi), xa, xb) - ard_gram(make(lo), xa, xb)) / 2e-6;
            CHECK(oracle::scaled_error(ard_gram_grad(ard, xa, xb, i), fd) < 1e-5);
        }
        // inputs of a symmetric gram
        const Matrix g = oracle::random_matrix(rng, 5, 5);
        const Matrix an = ard_gram_input_grad(ard, xa, g);
        Matrix fd(5, 3);
        for (Eigen::Index r = 0; r < 5; ++r) {
            for (Eigen::Index c = 0; c < 3; ++c) {
                Matrix hi = xa, lo = xa;
                hi(r, c) += 1e-6;
                lo(r, c) -= 1e-6;
                fd(r, c) = (g.cwiseProduct(ard_gram(ard, hi, hi)).sum() - g.cwiseProduct(ard_gram(ard, lo, lo)).sum()) /
                           2e-6;
            }
        }
        CHECK(oracle::scaled_error(an, fd) < 1e-5);
    }
}

TEST_CASE("log-space accessors round trip") {
    const auto spec = all_families().back();
    const auto back = spec.with_log_params(spec.log_params());
    CHECK((back.params() - spec.params()).cwiseAbs().maxCoeff() < 1e-14);
    CHECK(spec.param_names().size() == static_cast<std::size_t>(spec.num_params()));
    const auto mask = spec.free_mask();
    // fixed period of the second component
    CHECK(mask[4] == false);
    const ArdKernelParams ard(2.0, vec({0.5, 3.0}));
    const auto ard2 = ArdKernelParams::from_log_params(ard.log_params());
    CHECK(ard2.variance == doctest::Approx(2.0));
    CHECK(ard2.weights[1] == doctest::Approx(3.0));
}
