#pragma once

#include <vector>

#include "vgpds/kernels.hpp"
#include "vgpds/linalg.hpp"
#include "vgpds/psi_stats.hpp"
#include "vgpds/state.hpp"
#include "vgpds/temporal_prior.hpp"

namespace vgpds {

/// The observations as seen by the bound. Only products with Y Y^T are ever
/// needed, so the term is stored either as the N x N Gram matrix Y Y^T or,
/// when D < N, as Y itself.
class DataTerm {
public:
    DataTerm() = default;
    static DataTerm from_gram(Matrix yyt, Eigen::Index dims);
    static DataTerm direct(Matrix y);

    Eigen::Index rows() const { return rows_; }
    Eigen::Index dims() const { return dims_; }
    double trace() const { return trace_; }
    bool is_gram() const { return gram_form_; }

    // Y Y^T x
    Matrix apply(const Matrix &x) const;
    // Y Y^T materialized.
    Matrix gram() const;
    // F with F F^T = Y Y^T; F is N x min(N, D).
    Matrix symmetric_factor() const;

private:
    Matrix data_;
    Eigen::Index rows_ = 0;
    Eigen::Index dims_ = 0;
    double trace_ = 0.0;
    bool gram_form_ = true;
};

/// Precomputes Y Y^T once; every later bound and gradient evaluation touches
/// the data only through it.
DataTerm precompute_data_term(const Matrix &y);

/// One collapsed likelihood term: the observations `data` are attached to the
/// latent rows listed in `rows` (indices into the latent set).
struct LikelihoodBlock {
    std::vector<Eigen::Index> rows;
    DataTerm data;
};

struct BoundReport {
    double bound = 0.0;      // F_v
    double data_term = 0.0;  // F^_v
    double kl = 0.0;
    // diagnostics, summed over blocks where meaningful
    double log_det_kmm = 0.0;
    double log_det_a = 0.0;
    double trace_yyt = 0.0;
    double trace_kmm_inv_psi2 = 0.0;
    double psi0 = 0.0;
    double kmm_jitter = 0.0;
};

/// Gradients of F_v in raw (untransformed) parameter space.
struct BoundGradient {
    Matrix mu_bar;      // N x Q
    Matrix lambda;      // N x Q
    Matrix inducing;    // M x Q
    Vector theta_f;     // ARD: variance, w_1..w_Q
    Vector theta_x;     // temporal kernel raw parameters
    double beta = 0.0;
};

/// Everything the bound depends on. The training objective uses one block
/// holding all rows; test-time reconstruction uses several.
struct BoundProblem {
    const TemporalPrior *prior = nullptr;
    const ArdKernelParams *ard = nullptr;
    double beta = 1.0;
    const VariationalState *state = nullptr;
    const std::vector<LikelihoodBlock> *blocks = nullptr;
};

BoundReport evaluate_problem(const BoundProblem &problem);
BoundReport evaluate_problem(const BoundProblem &problem, BoundGradient &grad);

/// Per-point marginal moments of q(X) restricted to `rows`.
MomentSet moments_for_rows(const std::vector<ImpliedPosterior> &posts, const std::vector<Eigen::Index> &rows);

std::vector<ImpliedPosterior> implied_posteriors(const TemporalPrior &prior, const VariationalState &state);

}  // namespace vgpds
