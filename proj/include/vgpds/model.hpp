#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "vgpds/bound.hpp"
#include "vgpds/dataset.hpp"
#include "vgpds/kernels.hpp"
#include "vgpds/state.hpp"
#include "vgpds/temporal_prior.hpp"

namespace vgpds {

struct ModelConfig {
    Eigen::Index latent_dims = 2;
    // <= 0 means min(N, 50).
    Eigen::Index num_inducing = -1;
    TemporalKernelSpec temporal = TemporalKernelSpec::rbf(1.0, 10.0);
    double lambda_init = 0.5;
    // Variance added to the diagonal of K_t when solving for mu_bar, so that
    // K_t mu_bar is a GP-smoothed version of the PCA scores. Zero gives the
    // plain solve mu_bar = K_t^-1 mu (with jitter).
    double init_smoothing = 0.1;
    std::uint64_t seed = 0;
    // Subtract column means before modelling; they are added back on prediction.
    bool center = true;
};

/// A dataset bound to kernels, noise precision and q(X). The data enter the
/// bound only through the cached Y Y^T; `y` is kept for output predictions.
struct VgpdsModel {
    TemporalPrior prior;
    ArdKernelParams ard;
    double beta = 1.0;
    VariationalState state;

    Matrix y;                 // centered observations, N x D
    Vector offset;            // column means removed from the raw data
    std::vector<LikelihoodBlock> blocks;
    std::uint64_t checksum = 0;
    std::vector<std::string> names;
    std::string dataset_path;

    Eigen::Index num_points() const { return y.rows(); }
    Eigen::Index output_dims() const { return y.cols(); }
    Eigen::Index latent_dims() const { return state.latent_dims(); }
    Eigen::Index num_inducing() const { return state.num_inducing(); }

    void set_temporal_kernel(const TemporalKernelSpec &spec);
    BoundProblem problem() const;
    void validate() const;
};

/// Builds a model from explicit parts, without centering the data.
VgpdsModel assemble_model(const TemporalPrior &prior, const ArdKernelParams &ard, double beta,
                          const VariationalState &state, const Matrix &y);

/// Initializes a model from data: PCA means scaled to unit variance,
/// mu_bar = (K_t + s I)^-1 mu, constant lambda, inducing inputs drawn from the rows of
/// mu, unit ARD weights and variance, beta^-1 = 0.01 var(Y).
VgpdsModel make_model(const TimeSeriesDataset &data, const ModelConfig &config);

BoundReport evaluate_bound(const VgpdsModel &model);
BoundReport bound_gradients(const VgpdsModel &model, BoundGradient &grad);

}  // namespace vgpds
