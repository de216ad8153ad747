#pragma once

#include <Eigen/Dense>
#include <string>
#include <string_view>
#include <vector>

#include "vgpds/linalg.hpp"

namespace vgpds {

enum class TemporalFamily { Rbf, Matern32, Periodic, White, Bias, Sum };

std::string_view family_name(TemporalFamily family);
TemporalFamily family_from_name(std::string_view name);

/// Covariance function over scalar time stamps.
///
/// Hyperparameters are laid out in a fixed order per family:
///   rbf, matern32  : variance, lengthscale
///   periodic       : variance, lengthscale, period
///   white, bias    : variance
///   sum            : components' parameters concatenated
/// The periodic kernel uses sin^2(2 pi (t - t') / T) / l_t in its exponent,
/// i.e. the lengthscale enters linearly rather than squared.
struct TemporalKernelSpec {
    TemporalFamily family = TemporalFamily::Rbf;
    double variance = 1.0;
    double lengthscale = 1.0;
    double period = 1.0;
    // Period is a fixed configuration value unless this is set.
    bool optimize_period = false;
    // Excludes every parameter of this component from optimization.
    bool fixed = false;
    std::vector<TemporalKernelSpec> components;

    static TemporalKernelSpec rbf(double variance, double lengthscale);
    static TemporalKernelSpec matern32(double variance, double lengthscale);
    static TemporalKernelSpec periodic(double variance, double lengthscale, double period);
    static TemporalKernelSpec white(double variance, bool fixed = false);
    static TemporalKernelSpec bias(double variance);
    static TemporalKernelSpec sum(std::vector<TemporalKernelSpec> components);

    // Throws ValidationError on a non-positive hyperparameter or a malformed sum.
    void validate() const;

    Eigen::Index num_params() const;
    std::vector<std::string> param_names() const;
    // Which parameters the optimizer may move.
    std::vector<bool> free_mask() const;

    Vector params() const;
    Vector log_params() const;
    TemporalKernelSpec with_params(const Vector &raw) const;
    TemporalKernelSpec with_log_params(const Vector &log_values) const;

    double operator()(double ti, double tj) const;
};

/// K[i, j] = k(t_a[i], t_b[j]). The white component contributes only where
/// the two time stamps are exactly equal.
Matrix temporal_gram(const TemporalKernelSpec &spec, const Vector &t_a, const Vector &t_b);

/// Elementwise derivative of temporal_gram with respect to raw parameter `index`.
Matrix temporal_gram_grad(const TemporalKernelSpec &spec, const Vector &t_a, const Vector &t_b,
                          Eigen::Index index);

/// ARD squared-exponential mapping kernel
///   k(x, x') = variance * exp(-1/2 sum_q w_q (x_q - x'_q)^2).
/// Parameter order: variance, then w_1..w_Q.
struct ArdKernelParams {
    double variance = 1.0;
    Vector weights;

    ArdKernelParams() = default;
    ArdKernelParams(double variance, Vector weights);

    Eigen::Index dims() const { return weights.size(); }
    Eigen::Index num_params() const { return weights.size() + 1; }
    void validate() const;

    Vector params() const;
    Vector log_params() const;
    static ArdKernelParams from_log_params(const Vector &log_values);
};

Matrix ard_gram(const ArdKernelParams &params, const Matrix &x_a, const Matrix &x_b);

/// Elementwise derivative of ard_gram w.r.t. raw parameter `index`
/// (0 = variance, q + 1 = w_q).
Matrix ard_gram_grad(const ArdKernelParams &params, const Matrix &x_a, const Matrix &x_b,
                     Eigen::Index index);

/// Gradient of sum_{m,m'} g[m,m'] * k(z_m, z_m') with respect to the inputs z
/// (M x Q), where both arguments of the symmetric Gram matrix are z.
Matrix ard_gram_input_grad(const ArdKernelParams &params, const Matrix &z, const Matrix &g);

}  // namespace vgpds
