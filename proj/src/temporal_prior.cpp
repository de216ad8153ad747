#include "vgpds/temporal_prior.hpp"

#include <string>

#include "vgpds/error.hpp"

namespace vgpds {

void VariationalState::validate() const {
    if (lambda.rows() != mu_bar.rows() || lambda.cols() != mu_bar.cols()) {
        throw ValidationError("variational state: mu_bar and lambda shapes differ");
    }
    if (inducing.cols() != mu_bar.cols()) {
        throw ValidationError("variational state: inducing inputs need one column per latent dimension");
    }
    if (!mu_bar.allFinite() || !inducing.allFinite()) {
        throw ValidationError("variational state contains non-finite values");
    }
    if (!lambda.allFinite() || (lambda.array() <= 0.0).any()) {
        throw ValidationError("variational state: lambda must be strictly positive");
    }
}

SequenceLayout SequenceLayout::single(Eigen::Index n) {
    SequenceLayout l;
    l.ranges.emplace_back(0, n);
    return l;
}

SequenceLayout SequenceLayout::from_ids(const std::vector<int> &ids) {
    SequenceLayout l;
    std::vector<int> seen;
    Eigen::Index start = 0;
    for (std::size_t i = 1; i <= ids.size(); ++i) {
        if (i == ids.size() || ids[i] != ids[i - 1]) {
            for (int s : seen) {
                if (s == ids[i - 1]) {
                    throw ValidationError("sequence id " + std::to_string(s) + " is not contiguous (row " +
                                          std::to_string(start + 1) + ")");
                }
            }
            seen.push_back(ids[i - 1]);
            l.ranges.emplace_back(start, static_cast<Eigen::Index>(i));
            start = static_cast<Eigen::Index>(i);
        }
    }
    return l;
}

std::vector<int> SequenceLayout::ids() const {
    std::vector<int> out(static_cast<std::size_t>(size()));
    for (std::size_t s = 0; s < ranges.size(); ++s) {
        for (Eigen::Index i = ranges[s].first; i < ranges[s].second; ++i) { out[i] = static_cast<int>(s); }
    }
    return out;
}

void SequenceLayout::validate(Eigen::Index n) const {
    Eigen::Index expect = 0;
    for (const auto &[a, b] : ranges) {
        if (a != expect || b <= a) { throw ValidationError("sequence layout ranges must be contiguous and non-empty"); }
        expect = b;
    }
    if (expect != n) {
        throw ValidationError("sequence layout covers " + std::to_string(expect) + " rows, expected " +
                              std::to_string(n));
    }
}

namespace {

void mask_blocks(Matrix &k, const std::vector<int> &row_ids, const std::vector<int> &col_ids) {
    for (Eigen::Index j = 0; j < k.cols(); ++j) {
        for (Eigen::Index i = 0; i < k.rows(); ++i) {
            if (row_ids[i] != col_ids[j]) { k(i, j) = 0.0; }
        }
    }
}

}  // namespace

TemporalPrior build_prior(const TemporalKernelSpec &spec, const Vector &t, const SequenceLayout &layout) {
    layout.validate(t.size());
    return build_prior(spec, t, layout.ids());
}

TemporalPrior build_prior(const TemporalKernelSpec &spec, const Vector &t, const std::vector<int> &seq_ids) {
    if (static_cast<Eigen::Index>(seq_ids.size()) != t.size()) {
        throw ValidationError("one sequence id per time stamp is required");
    }
    if (!t.allFinite()) { throw ValidationError("time stamps must be finite"); }
    TemporalPrior p;
    p.spec = spec;
    p.times = t;
    p.seq_ids = seq_ids;
    p.gram = temporal_gram(spec, t, t);
    mask_blocks(p.gram, seq_ids, seq_ids);
    p.chol = jittered_cholesky(p.gram, "temporal prior K_t");
    return p;
}

Matrix TemporalPrior::gram_grad(Eigen::Index index) const {
    Matrix g = temporal_gram_grad(spec, times, times, index);
    mask_blocks(g, seq_ids, seq_ids);
    return g;
}

Matrix TemporalPrior::cross(const Vector &t_star, const std::vector<int> &star_ids) const {
    if (static_cast<Eigen::Index>(star_ids.size()) != t_star.size()) {
        throw ValidationError("one sequence id per test time stamp is required");
    }
    if (!t_star.allFinite()) { throw ValidationError("test time stamps must be finite"); }
    Matrix k = temporal_gram(spec, t_star, times);
    mask_blocks(k, star_ids, seq_ids);
    return k;
}

ImpliedPosterior implied_posterior(const Matrix &k, const Vector &mu_bar, const Vector &lambda) {
    const Vector sq = lambda.array().sqrt().matrix();
    Matrix btilde = sq.asDiagonal() * k * sq.asDiagonal();
    btilde.diagonal().array() += 1.0;
    const auto llt = checked_cholesky(btilde, "B~ = I + L^1/2 K_t L^1/2");
    const Matrix binv = spd_inverse(llt);

    ImpliedPosterior post;
    post.mean = k * mu_bar;
    post.b_hat = sq.asDiagonal() * binv * sq.asDiagonal();
    // S = (K^-1 + L)^-1 = L^-1/2 B~^-1 L^1/2 K. The product form avoids the
    // cancellation in K - K B^ K when lambda is large.
    const Vector isq = sq.cwiseInverse();
    post.cov = isq.asDiagonal() * binv * sq.asDiagonal() * k;
    post.cov = 0.5 * (post.cov + post.cov.transpose());
    post.log_det_btilde = log_det(llt);
    post.trace_btilde_inv = binv.trace();
    return post;
}

double kl_q_p(const TemporalPrior &prior, const Matrix &mu_bar, const Matrix &lambda) {
    const auto n = static_cast<double>(prior.size());
    double kl = 0.0;
    for (Eigen::Index q = 0; q < mu_bar.cols(); ++q) {
        const auto post = implied_posterior(prior.gram, mu_bar.col(q), lambda.col(q));
        const double quad = mu_bar.col(q).dot(post.mean);
        kl += 0.5 * (post.trace_btilde_inv + quad + post.log_det_btilde - n);
    }
    return kl;
}

double kl_q_p(const TemporalPrior &prior, const VariationalState &state) {
    return kl_q_p(prior, state.mu_bar, state.lambda);
}

KlGradient kl_gradients(const TemporalPrior &prior, const Matrix &mu_bar, const Matrix &lambda) {
    KlGradient g;
    g.d_mu_bar.resize(mu_bar.rows(), mu_bar.cols());
    g.d_lambda.resize(mu_bar.rows(), mu_bar.cols());
    Matrix dk_weight = Matrix::Zero(prior.size(), prior.size());
    for (Eigen::Index q = 0; q < mu_bar.cols(); ++q) {
        const auto post = implied_posterior(prior.gram, mu_bar.col(q), lambda.col(q));
        g.d_mu_bar.col(q) = post.mean;
        g.d_lambda.col(q) = 0.5 * post.cov.cwiseProduct(post.cov) * lambda.col(q);
        dk_weight += 0.5 * (post.b_hat * prior.gram * post.b_hat + mu_bar.col(q) * mu_bar.col(q).transpose());
    }
    g.d_theta.resize(prior.spec.num_params());
    for (Eigen::Index i = 0; i < g.d_theta.size(); ++i) {
        g.d_theta[i] = dk_weight.cwiseProduct(prior.gram_grad(i)).sum();
    }
    return g;
}

}  // namespace vgpds
