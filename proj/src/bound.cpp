#include "vgpds/bound.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "vgpds/error.hpp"

namespace vgpds {

DataTerm DataTerm::from_gram(Matrix yyt, Eigen::Index dims) {
    if (yyt.rows() != yyt.cols()) { throw ValidationError("Y Y^T must be square"); }
    DataTerm d;
    d.rows_ = yyt.rows();
    d.dims_ = dims;
    d.trace_ = yyt.trace();
    d.data_ = std::move(yyt);
    d.gram_form_ = true;
    return d;
}

DataTerm DataTerm::direct(Matrix y) {
    DataTerm d;
    d.rows_ = y.rows();
    d.dims_ = y.cols();
    d.trace_ = y.squaredNorm();
    d.data_ = std::move(y);
    d.gram_form_ = false;
    return d;
}

Matrix DataTerm::apply(const Matrix &x) const {
    if (gram_form_) { return data_ * x; }
    return data_ * (data_.transpose() * x);
}

Matrix DataTerm::gram() const {
    if (gram_form_) { return data_; }
    return data_ * data_.transpose();
}

Matrix DataTerm::symmetric_factor() const {
    if (!gram_form_) { return data_; }
    Eigen::SelfAdjointEigenSolver<Matrix> eig(data_);
    const Vector root = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    return eig.eigenvectors() * root.asDiagonal();
}

DataTerm precompute_data_term(const Matrix &y) {
    if (!y.allFinite()) { throw ValidationError("data matrix contains non-finite values"); }
    Matrix yyt = Matrix::Zero(y.rows(), y.rows());
    yyt.selfadjointView<Eigen::Lower>().rankUpdate(y);
    yyt = yyt.selfadjointView<Eigen::Lower>();
    return DataTerm::from_gram(std::move(yyt), y.cols());
}

std::vector<ImpliedPosterior> implied_posteriors(const TemporalPrior &prior, const VariationalState &state) {
    std::vector<ImpliedPosterior> posts;
    posts.reserve(static_cast<std::size_t>(state.latent_dims()));
    for (Eigen::Index q = 0; q < state.latent_dims(); ++q) {
        posts.push_back(implied_posterior(prior.gram, state.mu_bar.col(q), state.lambda.col(q)));
    }
    return posts;
}

MomentSet moments_for_rows(const std::vector<ImpliedPosterior> &posts, const std::vector<Eigen::Index> &rows) {
    const auto nq = static_cast<Eigen::Index>(posts.size());
    const auto nr = static_cast<Eigen::Index>(rows.size());
    MomentSet mo{Matrix(nr, nq), Matrix(nr, nq)};
    for (Eigen::Index q = 0; q < nq; ++q) {
        for (Eigen::Index i = 0; i < nr; ++i) {
            mo.mean(i, q) = posts[q].mean[rows[i]];
            mo.var(i, q) = std::max(0.0, posts[q].cov(rows[i], rows[i]));
        }
    }
    return mo;
}

namespace {

constexpr double kLog2Pi = 1.8378770664093453;

void check_problem(const BoundProblem &p) {
    if (!p.prior || !p.ard || !p.state || !p.blocks) { throw ValidationError("incomplete bound problem"); }
    if (!(p.beta > 0.0) || !std::isfinite(p.beta)) { throw ValidationError("noise precision beta must be positive"); }
    p.state->validate();
    p.ard->validate();
    if (p.state->num_points() != p.prior->size()) {
        throw ValidationError("variational state and temporal prior disagree on N");
    }
    if (p.ard->dims() != p.state->latent_dims()) {
        throw ValidationError("ARD kernel and variational state disagree on Q");
    }
    for (const auto &b : *p.blocks) {
        if (static_cast<Eigen::Index>(b.rows.size()) != b.data.rows()) {
            throw ValidationError("likelihood block rows do not match its data");
        }
        for (auto r : b.rows) {
            if (r < 0 || r >= p.prior->size()) { throw ValidationError("likelihood block row out of range"); }
        }
    }
}

BoundReport evaluate_impl(const BoundProblem &p, BoundGradient *grad) {
    check_problem(p);
    const auto &state = *p.state;
    const auto &ard = *p.ard;
    const auto &prior = *p.prior;
    const double beta = p.beta;
    const Matrix &z = state.inducing;
    const Eigen::Index n_all = state.num_points();
    const Eigen::Index nq = state.latent_dims();
    const Eigen::Index m = state.num_inducing();
    const auto md = static_cast<double>(m);

    const auto posts = implied_posteriors(prior, state);

    const Matrix kmm_raw = ard_gram(ard, z, z);
    const auto kchol = jittered_cholesky(kmm_raw, "K_MM");
    const double logdet_k = kchol.log_det();
    const auto lower = kchol.llt.matrixL();
    const auto upper = kchol.llt.matrixU();
    // L^-T X L^-1 for symmetric X, where K_MM = L L^T.
    auto sandwich = [&](const Matrix &x) -> Matrix {
        const Matrix t = upper.solve(x);
        return upper.solve(Matrix(t.transpose()));
    };

    BoundReport rep;
    rep.kmm_jitter = kchol.jitter;
    rep.log_det_kmm = logdet_k;

    Matrix g_mean = Matrix::Zero(n_all, nq);
    Matrix g_var = Matrix::Zero(n_all, nq);
    Matrix g_kmm = Matrix::Zero(m, m);
    if (grad) {
        grad->theta_f = Vector::Zero(ard.num_params());
        grad->inducing = Matrix::Zero(m, nq);
        grad->beta = 0.0;
    }

    // Everything is expressed through P = L^-1 Psi2 L^-T and B = I + beta P,
    // so that the only matrix inverted is B (eigenvalues >= 1). With
    // A = K_MM / beta + Psi2 = L B L^T / beta this gives
    //   log|K_MM| - log|A| = M log(beta) - log|B|,  Tr(A^-1 C) = beta Tr(B^-1 E YY^T E^T),
    // where E = L^-1 Psi1^T.
    for (const auto &block : *p.blocks) {
        const auto nb = static_cast<double>(block.rows.size());
        const auto d = static_cast<double>(block.data.dims());
        if (block.rows.empty() || block.data.dims() == 0) { continue; }
        const MomentSet mo = moments_for_rows(posts, block.rows);
        const PsiBundle psi = psi_stats(ard, mo, z);

        const Matrix e = lower.solve(Matrix(psi.psi1.transpose()));  // M x N_b
        Matrix pm = lower.solve(Matrix(lower.solve(psi.psi2).transpose()));
        pm = 0.5 * (pm + pm.transpose());
        Matrix bm = beta * pm;
        bm.diagonal().array() += 1.0;
        const auto bchol = checked_cholesky(bm, "I + beta L^-1 Psi2 L^-T");
        const double logdet_b = log_det(bchol);

        const Matrix ye = block.data.apply(Matrix(e.transpose()));  // Y Y^T E^T, N_b x M
        Matrix ce = e * ye;                                          // E Y Y^T E^T
        ce = 0.5 * (ce + ce.transpose());
        const Matrix binv_ce = bchol.solve(ce);
        const double tr_binv_ce = binv_ce.trace();
        const double tr_p = pm.trace();

        const double fhat = 0.5 * d * (nb * std::log(beta) - nb * kLog2Pi - logdet_b) -
                            0.5 * beta * block.data.trace() + 0.5 * beta * beta * tr_binv_ce -
                            0.5 * beta * d * psi.psi0 + 0.5 * beta * d * tr_p;
        rep.data_term += fhat;
        rep.log_det_a += logdet_k + logdet_b - md * std::log(beta);
        rep.trace_yyt += block.data.trace();
        rep.trace_kmm_inv_psi2 += tr_p;
        rep.psi0 += psi.psi0;

        if (!grad) { continue; }
        const Matrix binv_p = bchol.solve(pm);
        Matrix bcb = bchol.solve(Matrix(binv_ce.transpose()));  // B^-1 C_E B^-1
        bcb = 0.5 * (bcb + bcb.transpose());
        Matrix binv_p_sym = 0.5 * (binv_p + binv_p.transpose());

        const double g0 = -0.5 * beta * d;
        const Matrix g1 = beta * beta * upper.solve(Matrix(bchol.solve(Matrix(ye.transpose())))).transpose();
        const Matrix g2 = 0.5 * beta * sandwich(beta * d * binv_p_sym - beta * beta * bcb);
        Matrix kk = binv_p_sym * pm;
        kk = 0.5 * (kk + kk.transpose());
        g_kmm += -0.5 * beta * beta * sandwich(d * kk + bcb);
        grad->beta += 0.5 * (d * (nb / beta - binv_p.trace()) - block.data.trace()) + beta * tr_binv_ce -
                      0.5 * beta * beta * binv_p.cwiseProduct(binv_ce).sum() - 0.5 * d * psi.psi0 + 0.5 * d * tr_p;

        const PsiGradient pg = psi_grads(ard, mo, z, g0, g1, g2);
        grad->theta_f[0] += pg.d_variance;
        grad->theta_f.tail(nq) += pg.d_weights;
        grad->inducing += pg.d_inducing;
        for (std::size_t i = 0; i < block.rows.size(); ++i) {
            g_mean.row(block.rows[i]) += pg.d_mean.row(static_cast<Eigen::Index>(i));
            g_var.row(block.rows[i]) += pg.d_var.row(static_cast<Eigen::Index>(i));
        }
    }

    for (Eigen::Index q = 0; q < nq; ++q) {
        const auto &post = posts[q];
        rep.kl += 0.5 * (post.trace_btilde_inv + state.mu_bar.col(q).dot(post.mean) + post.log_det_btilde -
                         static_cast<double>(n_all));
    }
    rep.bound = rep.data_term - rep.kl;
    if (!std::isfinite(rep.bound)) { throw NumericalError("variational bound is not finite"); }
    if (!grad) { return rep; }

    // K_MM dependence: jitter scales with the signal variance.
    grad->theta_f[0] += g_kmm.cwiseProduct(kmm_raw).sum() / ard.variance + kchol.relative_jitter * g_kmm.trace();
    for (Eigen::Index q = 0; q < nq; ++q) {
        grad->theta_f[q + 1] += g_kmm.cwiseProduct(ard_gram_grad(ard, z, z, q + 1)).sum();
    }
    grad->inducing += ard_gram_input_grad(ard, z, g_kmm);

    // Reparametrized variational parameters and the temporal kernel.
    const Matrix &k = prior.gram;
    const Matrix eye = Matrix::Identity(n_all, n_all);
    grad->mu_bar.resize(n_all, nq);
    grad->lambda.resize(n_all, nq);
    Matrix g_kt = Matrix::Zero(n_all, n_all);
    for (Eigen::Index q = 0; q < nq; ++q) {
        const auto &post = posts[q];
        const Vector mub = state.mu_bar.col(q);
        const Vector gs = g_var.col(q);
        grad->mu_bar.col(q) = k * (g_mean.col(q) - mub);
        grad->lambda.col(q) = -post.cov.cwiseProduct(post.cov) * (gs + 0.5 * state.lambda.col(q));
        const Matrix t = eye - post.b_hat * k;
        g_kt += -0.5 * (post.b_hat * k * post.b_hat + mub * mub.transpose()) + t * gs.asDiagonal() * t.transpose() +
                mub * g_mean.col(q).transpose();
    }
    grad->theta_x.resize(prior.spec.num_params());
    for (Eigen::Index i = 0; i < grad->theta_x.size(); ++i) {
        grad->theta_x[i] = g_kt.cwiseProduct(prior.gram_grad(i)).sum();
    }
    return rep;
}

}  // namespace

BoundReport evaluate_problem(const BoundProblem &problem) { return evaluate_impl(problem, nullptr); }

BoundReport evaluate_problem(const BoundProblem &problem, BoundGradient &grad) {
    return evaluate_impl(problem, &grad);
}

}  // namespace vgpds
