#include "vgpds/kernels.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "vgpds/error.hpp"

namespace vgpds {

namespace {

constexpr double kSqrt3 = 1.7320508075688772;

Eigen::Index leaf_params(TemporalFamily family) {
    switch (family) {
        case TemporalFamily::Rbf:
        case TemporalFamily::Matern32: return 2;
        case TemporalFamily::Periodic: return 3;
        case TemporalFamily::White:
        case TemporalFamily::Bias: return 1;
        case TemporalFamily::Sum: return 0;
    }
    return 0;
}

double leaf_value(const TemporalKernelSpec &k, double r) {
    switch (k.family) {
        case TemporalFamily::Rbf: return k.variance * std::exp(-r * r / (2.0 * k.lengthscale * k.lengthscale));
        case TemporalFamily::Matern32: {
            const double a = kSqrt3 * std::abs(r) / k.lengthscale;
            return k.variance * (1.0 + a) * std::exp(-a);
        }
        case TemporalFamily::Periodic: {
            const double s = std::sin(2.0 * std::numbers::pi * r / k.period);
            return k.variance * std::exp(-0.5 * s * s / k.lengthscale);
        }
        case TemporalFamily::White: return r == 0.0 ? k.variance : 0.0;
        case TemporalFamily::Bias: return k.variance;
        case TemporalFamily::Sum: break;
    }
    return 0.0;
}

// d k / d (raw parameter `which`) for a non-sum kernel at signed distance r.
double leaf_grad(const TemporalKernelSpec &k, double r, Eigen::Index which) {
    if (which == 0) { return k.variance > 0.0 ? leaf_value(k, r) / k.variance : 0.0; }
    const double l = k.lengthscale;
    switch (k.family) {
        case TemporalFamily::Rbf: return leaf_value(k, r) * r * r / (l * l * l);
        case TemporalFamily::Matern32: {
            const double a = kSqrt3 * std::abs(r) / l;
            return k.variance * a * a * std::exp(-a) / l;
        }
        case TemporalFamily::Periodic: {
            const double arg = 2.0 * std::numbers::pi * r / k.period;
            const double s = std::sin(arg);
            if (which == 1) { return leaf_value(k, r) * 0.5 * s * s / (l * l); }
            return leaf_value(k, r) * s * std::cos(arg) * 2.0 * std::numbers::pi * r / (l * k.period * k.period);
        }
        default: break;
    }
    return 0.0;
}

template <typename Fn>
Matrix fill_gram(const Vector &t_a, const Vector &t_b, Fn &&fn) {
    Matrix k(t_a.size(), t_b.size());
    for (Eigen::Index j = 0; j < t_b.size(); ++j) {
        for (Eigen::Index i = 0; i < t_a.size(); ++i) { k(i, j) = fn(t_a[i] - t_b[j]); }
    }
    return k;
}

void check_positive(double v, const char *what) {
    if (!(v > 0.0) || !std::isfinite(v)) {
        throw ValidationError(std::string("temporal kernel ") + what + " must be positive and finite, got " +
                              std::to_string(v));
    }
}

}  // namespace

std::string_view family_name(TemporalFamily family) {
    switch (family) {
        case TemporalFamily::Rbf: return "rbf";
        case TemporalFamily::Matern32: return "matern32";
        case TemporalFamily::Periodic: return "periodic";
        case TemporalFamily::White: return "white";
        case TemporalFamily::Bias: return "bias";
        case TemporalFamily::Sum: return "sum";
    }
    return "?";
}

TemporalFamily family_from_name(std::string_view name) {
    for (auto f : {TemporalFamily::Rbf, TemporalFamily::Matern32, TemporalFamily::Periodic, TemporalFamily::White,
                   TemporalFamily::Bias, TemporalFamily::Sum}) {
        if (family_name(f) == name) { return f; }
    }
    throw ValidationError("unknown temporal kernel family '" + std::string(name) + "'");
}

TemporalKernelSpec TemporalKernelSpec::rbf(double variance, double lengthscale) {
    TemporalKernelSpec k;
    k.family = TemporalFamily::Rbf;
    k.variance = variance;
    k.lengthscale = lengthscale;
    return k;
}

TemporalKernelSpec TemporalKernelSpec::matern32(double variance, double lengthscale) {
    auto k = rbf(variance, lengthscale);
    k.family = TemporalFamily::Matern32;
    return k;
}

TemporalKernelSpec TemporalKernelSpec::periodic(double variance, double lengthscale, double period) {
    auto k = rbf(variance, lengthscale);
    k.family = TemporalFamily::Periodic;
    k.period = period;
    return k;
}

TemporalKernelSpec TemporalKernelSpec::white(double variance, bool fixed) {
    TemporalKernelSpec k;
    k.family = TemporalFamily::White;
    k.variance = variance;
    k.fixed = fixed;
    return k;
}

TemporalKernelSpec TemporalKernelSpec::bias(double variance) {
    TemporalKernelSpec k;
    k.family = TemporalFamily::Bias;
    k.variance = variance;
    return k;
}

TemporalKernelSpec TemporalKernelSpec::sum(std::vector<TemporalKernelSpec> components) {
    TemporalKernelSpec k;
    k.family = TemporalFamily::Sum;
    k.components = std::move(components);
    return k;
}

void TemporalKernelSpec::validate() const {
    if (family == TemporalFamily::Sum) {
        if (components.empty()) { throw ValidationError("sum kernel needs at least one component"); }
        for (const auto &c : components) {
            if (c.family == TemporalFamily::Sum) { throw ValidationError("sum kernel components cannot be sums"); }
            c.validate();
        }
        return;
    }
    check_positive(variance, "variance");
    if (family == TemporalFamily::Rbf || family == TemporalFamily::Matern32 || family == TemporalFamily::Periodic) {
        check_positive(lengthscale, "lengthscale");
    }
    if (family == TemporalFamily::Periodic) { check_positive(period, "period"); }
}

Eigen::Index TemporalKernelSpec::num_params() const {
    if (family != TemporalFamily::Sum) { return leaf_params(family); }
    Eigen::Index n = 0;
    for (const auto &c : components) { n += c.num_params(); }
    return n;
}

std::vector<std::string> TemporalKernelSpec::param_names() const {
    std::vector<std::string> names;
    auto leaf = [&names](const TemporalKernelSpec &k, const std::string &prefix) {
        const std::string base = prefix + std::string(family_name(k.family)) + ".";
        names.push_back(base + "variance");
        if (leaf_params(k.family) >= 2) { names.push_back(base + "lengthscale"); }
        if (leaf_params(k.family) >= 3) { names.push_back(base + "period"); }
    };
    if (family == TemporalFamily::Sum) {
        for (std::size_t i = 0; i < components.size(); ++i) { leaf(components[i], std::to_string(i) + "."); }
    } else {
        leaf(*this, "");
    }
    return names;
}

std::vector<bool> TemporalKernelSpec::free_mask() const {
    std::vector<bool> mask;
    auto leaf = [&mask](const TemporalKernelSpec &k) {
        for (Eigen::Index i = 0; i < leaf_params(k.family); ++i) {
            mask.push_back(!k.fixed && (i < 2 || k.optimize_period));
        }
    };
    if (family == TemporalFamily::Sum) {
        for (const auto &c : components) { leaf(c); }
    } else {
        leaf(*this);
    }
    return mask;
}

Vector TemporalKernelSpec::params() const {
    Vector p(num_params());
    Eigen::Index at = 0;
    auto leaf = [&](const TemporalKernelSpec &k) {
        p[at++] = k.variance;
        if (leaf_params(k.family) >= 2) { p[at++] = k.lengthscale; }
        if (leaf_params(k.family) >= 3) { p[at++] = k.period; }
    };
    if (family == TemporalFamily::Sum) {
        for (const auto &c : components) { leaf(c); }
    } else {
        leaf(*this);
    }
    return p;
}

Vector TemporalKernelSpec::log_params() const { return params().array().log().matrix(); }

TemporalKernelSpec TemporalKernelSpec::with_params(const Vector &raw) const {
    if (raw.size() != num_params()) { throw ValidationError("temporal kernel parameter vector has wrong length"); }
    TemporalKernelSpec out = *this;
    Eigen::Index at = 0;
    auto leaf = [&](TemporalKernelSpec &k) {
        k.variance = raw[at++];
        if (leaf_params(k.family) >= 2) { k.lengthscale = raw[at++]; }
        if (leaf_params(k.family) >= 3) { k.period = raw[at++]; }
    };
    if (out.family == TemporalFamily::Sum) {
        for (auto &c : out.components) { leaf(c); }
    } else {
        leaf(out);
    }
    out.validate();
    return out;
}

TemporalKernelSpec TemporalKernelSpec::with_log_params(const Vector &log_values) const {
    return with_params(log_values.array().exp().matrix());
}

double TemporalKernelSpec::operator()(double ti, double tj) const {
    if (family != TemporalFamily::Sum) { return leaf_value(*this, ti - tj); }
    double v = 0.0;
    for (const auto &c : components) { v += leaf_value(c, ti - tj); }
    return v;
}

Matrix temporal_gram(const TemporalKernelSpec &spec, const Vector &t_a, const Vector &t_b) {
    spec.validate();
    if (spec.family != TemporalFamily::Sum) {
        return fill_gram(t_a, t_b, [&](double r) { return leaf_value(spec, r); });
    }
    Matrix k = Matrix::Zero(t_a.size(), t_b.size());
    for (const auto &c : spec.components) { k += temporal_gram(c, t_a, t_b); }
    return k;
}

Matrix temporal_gram_grad(const TemporalKernelSpec &spec, const Vector &t_a, const Vector &t_b,
                          Eigen::Index index) {
    spec.validate();
    if (index < 0 || index >= spec.num_params()) {
        throw ValidationError("temporal kernel hyperparameter index " + std::to_string(index) + " out of range");
    }
    if (spec.family != TemporalFamily::Sum) {
        return fill_gram(t_a, t_b, [&](double r) { return leaf_grad(spec, r, index); });
    }
    for (const auto &c : spec.components) {
        if (index < c.num_params()) { return temporal_gram_grad(c, t_a, t_b, index); }
        index -= c.num_params();
    }
    return {};
}

ArdKernelParams::ArdKernelParams(double variance_, Vector weights_)
    : variance(variance_), weights(std::move(weights_)) {}

void ArdKernelParams::validate() const {
    if (!(variance > 0.0) || !std::isfinite(variance)) {
        throw ValidationError("ARD signal variance must be positive and finite");
    }
    if (weights.size() == 0) { throw ValidationError("ARD kernel needs at least one latent dimension"); }
    if (!weights.allFinite() || (weights.array() < 0.0).any()) {
        throw ValidationError("ARD weights must be finite and non-negative");
    }
}

Vector ArdKernelParams::params() const {
    Vector p(num_params());
    p[0] = variance;
    p.tail(weights.size()) = weights;
    return p;
}

Vector ArdKernelParams::log_params() const { return params().array().log().matrix(); }

ArdKernelParams ArdKernelParams::from_log_params(const Vector &log_values) {
    const Vector p = log_values.array().exp().matrix();
    return ArdKernelParams(p[0], p.tail(p.size() - 1));
}

namespace {

void check_ard_shapes(const ArdKernelParams &params, const Matrix &x_a, const Matrix &x_b) {
    params.validate();
    if (x_a.cols() != params.dims() || x_b.cols() != params.dims()) {
        throw ValidationError("ARD kernel expects " + std::to_string(params.dims()) + " input columns, got " +
                              std::to_string(x_a.cols()) + " and " + std::to_string(x_b.cols()));
    }
}

}  // namespace

Matrix ard_gram(const ArdKernelParams &params, const Matrix &x_a, const Matrix &x_b) {
    check_ard_shapes(params, x_a, x_b);
    Matrix k(x_a.rows(), x_b.rows());
    for (Eigen::Index j = 0; j < x_b.rows(); ++j) {
        for (Eigen::Index i = 0; i < x_a.rows(); ++i) {
            double r = 0.0;
            for (Eigen::Index q = 0; q < params.dims(); ++q) {
                const double d = x_a(i, q) - x_b(j, q);
                r += params.weights[q] * d * d;
            }
            k(i, j) = params.variance * std::exp(-0.5 * r);
        }
    }
    return k;
}

Matrix ard_gram_grad(const ArdKernelParams &params, const Matrix &x_a, const Matrix &x_b, Eigen::Index index) {
    if (index < 0 || index >= params.num_params()) {
        throw ValidationError("ARD hyperparameter index " + std::to_string(index) + " out of range");
    }
    Matrix k = ard_gram(params, x_a, x_b);
    if (index == 0) { return k / params.variance; }
    const Eigen::Index q = index - 1;
    for (Eigen::Index j = 0; j < x_b.rows(); ++j) {
        for (Eigen::Index i = 0; i < x_a.rows(); ++i) {
            const double d = x_a(i, q) - x_b(j, q);
            k(i, j) *= -0.5 * d * d;
        }
    }
    return k;
}

Matrix ard_gram_input_grad(const ArdKernelParams &params, const Matrix &z, const Matrix &g) {
    const Matrix k = ard_gram(params, z, z);
    const Matrix gs = (g + g.transpose()).cwiseProduct(k);
    Matrix out = Matrix::Zero(z.rows(), z.cols());
    for (Eigen::Index q = 0; q < z.cols(); ++q) {
        const double w = params.weights[q];
        for (Eigen::Index m = 0; m < z.rows(); ++m) {
            double acc = 0.0;
            for (Eigen::Index n = 0; n < z.rows(); ++n) { acc += gs(m, n) * (z(n, q) - z(m, q)); }
            out(m, q) = w * acc;
        }
    }
    return out;
}

}  // namespace vgpds
