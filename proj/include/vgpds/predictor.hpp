#pragma once

#include <vector>

#include "vgpds/model.hpp"
#include "vgpds/optimizer.hpp"

namespace vgpds {

// Sequence selector for test time stamps: an index into the model's sequences
// (in order of appearance) or a new sequence independent of all training data.
inline constexpr int kNewSequence = -1;

/// Gaussian moments of q(X*), one column per latent dimension.
struct LatentForecast {
    Matrix mean;  // N* x Q
    Matrix var;   // N* x Q
};

/// Output moments at the test points. `var` holds the per-point marginal
/// variances of Y*, i.e. diag Cov(F*) + 1/beta, in the same layout as `mean`.
struct PredictiveMoments {
    LatentForecast latent;
    Matrix mean;               // N* x D' (data scale, offsets added back)
    Matrix var;                // N* x D'
    std::vector<int> columns;  // output columns described, 0-based
};

// Sequence id used by the prior for sequence index `sequence` (or a fresh id).
int sequence_id(const TemporalPrior &prior, int sequence);

LatentForecast forecast_latent(const VgpdsModel &model, const Vector &t_star, int sequence);

PredictiveMoments forecast_outputs(const VgpdsModel &model, const Vector &t_star, int sequence);

struct ReconstructConfig {
    // Iterations and tolerance of the test-time optimization. Kernel
    // hyperparameters, inducing inputs and beta stay at their trained values.
    TrainConfig optimizer = [] {
        TrainConfig c;
        c.schedule = {200};
        return c;
    }();
    // kNewSequence: the test rows form their own sequence. Otherwise they
    // continue the given training sequence.
    int sequence = kNewSequence;
    // Initial lambda for the test rows; <= 0 uses the mean of the trained lambda.
    double test_lambda = -1.0;
    // mu_bar of the joint problem starts at (K_t + s I)^-1 mu; 0 gives the plain solve.
    double init_smoothing = 0.1;
};

struct Reconstruction {
    PredictiveMoments moments;   // missing columns only
    std::vector<int> missing;
    TrainStatus status = TrainStatus::converged;
    std::vector<TraceRow> trace;
    bool optimized = false;
};

/// Fills in the unobserved columns of test rows. q(X, X*) is re-optimized
/// jointly over training and test latents against the bound with two data
/// terms: training rows on the missing columns and all rows on the observed
/// columns. `observed` holds 0-based column indices; `y_observed` is N* x |p| in
/// data scale.
Reconstruction reconstruct_missing(const VgpdsModel &model, const Vector &t_star, const Matrix &y_observed,
                                   const std::vector<int> &observed, const ReconstructConfig &config);

}  // namespace vgpds
