#pragma once

#include <utility>
#include <vector>

#include "vgpds/kernels.hpp"
#include "vgpds/linalg.hpp"
#include "vgpds/state.hpp"

namespace vgpds {

/// Partition of rows 0..N-1 into contiguous, ordered, half-open ranges, one
/// per independent sequence.
struct SequenceLayout {
    std::vector<std::pair<Eigen::Index, Eigen::Index>> ranges;

    static SequenceLayout single(Eigen::Index n);
    // Sequence ids must form contiguous runs; each run becomes one range.
    static SequenceLayout from_ids(const std::vector<int> &ids);

    Eigen::Index size() const { return ranges.empty() ? 0 : ranges.back().second; }
    Eigen::Index num_sequences() const { return static_cast<Eigen::Index>(ranges.size()); }
    std::vector<int> ids() const;
    void validate(Eigen::Index n) const;
};

/// Block-diagonal prior covariance K_t over the latent time stamps. Rows with
/// different sequence ids are independent a priori.
struct TemporalPrior {
    TemporalKernelSpec spec;
    Vector times;
    std::vector<int> seq_ids;
    Matrix gram;             // exact block-diagonal K_t
    JitteredCholesky chol;   // factor of K_t with jitter

    Eigen::Index size() const { return times.size(); }
    double log_det() const { return chol.log_det(); }

    // Block-diagonal derivative of K_t w.r.t. raw kernel parameter `index`.
    Matrix gram_grad(Eigen::Index index) const;
    // Cross-covariance k(t_star, t) masked to rows sharing a sequence id.
    Matrix cross(const Vector &t_star, const std::vector<int> &star_ids) const;
};

TemporalPrior build_prior(const TemporalKernelSpec &spec, const Vector &t, const SequenceLayout &layout);
// General form: rows may share a sequence id without being contiguous.
TemporalPrior build_prior(const TemporalKernelSpec &spec, const Vector &t, const std::vector<int> &seq_ids);

/// Moments of q(x_q) implied by (mu_bar_q, lambda_q), computed through the
/// well-conditioned B~ = I + L^1/2 K L^1/2 (eigenvalues >= 1).
struct ImpliedPosterior {
    Vector mean;            // K mu_bar
    Matrix cov;             // S = K - K B^ K
    Matrix b_hat;           // L^1/2 B~^-1 L^1/2 = (K + L^-1)^-1
    double log_det_btilde = 0.0;
    double trace_btilde_inv = 0.0;
};

ImpliedPosterior implied_posterior(const Matrix &k, const Vector &mu_bar, const Vector &lambda);

/// Sum over q of KL(N(mu_q, S_q) || N(0, K_t)); exactly zero when q equals the prior.
double kl_q_p(const TemporalPrior &prior, const Matrix &mu_bar, const Matrix &lambda);
double kl_q_p(const TemporalPrior &prior, const VariationalState &state);

struct KlGradient {
    Matrix d_mu_bar;   // N x Q
    Matrix d_lambda;   // N x Q
    Vector d_theta;    // raw temporal kernel parameters
};

KlGradient kl_gradients(const TemporalPrior &prior, const Matrix &mu_bar, const Matrix &lambda);

}  // namespace vgpds
