#include "vgpds/predictor.hpp"

#include <algorithm>
#include <numeric>
#include <string>

#include "vgpds/error.hpp"

namespace vgpds {

int sequence_id(const TemporalPrior &prior, int sequence) {
    std::vector<int> order;
    for (int id : prior.seq_ids) {
        if (std::find(order.begin(), order.end(), id) == order.end()) { order.push_back(id); }
    }
    if (sequence == kNewSequence) {
        return order.empty() ? 0 : *std::max_element(order.begin(), order.end()) + 1;
    }
    if (sequence < 0 || sequence >= static_cast<int>(order.size())) {
        throw ValidationError("sequence index " + std::to_string(sequence) + " out of range (model has " +
                              std::to_string(order.size()) + " sequences)");
    }
    return order[static_cast<std::size_t>(sequence)];
}

namespace {

LatentForecast latent_moments(const TemporalPrior &prior, const VariationalState &state, const Vector &t_star,
                              int star_id) {
    if (!t_star.allFinite()) { throw ValidationError("test time stamps must be finite"); }
    const Eigen::Index ns = t_star.size();
    const Eigen::Index nq = state.latent_dims();
    const std::vector<int> ids(static_cast<std::size_t>(ns), star_id);
    const Matrix kx = prior.cross(t_star, ids);  // N* x N
    Vector kss(ns);
    for (Eigen::Index i = 0; i < ns; ++i) { kss[i] = prior.spec(t_star[i], t_star[i]); }

    LatentForecast out{Matrix(ns, nq), Matrix(ns, nq)};
    for (Eigen::Index q = 0; q < nq; ++q) {
        const Vector sq = state.lambda.col(q).array().sqrt().matrix();
        Matrix btilde = sq.asDiagonal() * prior.gram * sq.asDiagonal();
        btilde.diagonal().array() += 1.0;
        const auto llt = checked_cholesky(btilde, "B~ = I + L^1/2 K_t L^1/2");
        // K*N B^ KN* = V^T V with V = L^-1 L^1/2 KN*
        const Matrix v = llt.matrixL().solve(sq.asDiagonal() * kx.transpose());
        out.mean.col(q) = kx * state.mu_bar.col(q);
        out.var.col(q) = (kss - v.colwise().squaredNorm().transpose()).cwiseMax(0.0);
    }
    return out;
}

// Output moments for test latents given training marginals and the (centered)
// training outputs on the columns of interest.
struct OutputMoments {
    Matrix mean;
    Matrix var;
};

OutputMoments output_moments(const ArdKernelParams &ard, double beta, const Matrix &inducing,
                             const MomentSet &train, const Matrix &y_train, const MomentSet &test) {
    // Same whitened form as the bound: K_MM = L L^T, P = L^-1 Psi2 L^-T,
    // B = I + beta P, so A^-1 = beta L^-T B^-1 L^-1.
    const auto kchol = jittered_cholesky(ard_gram(ard, inducing, inducing), "K_MM");
    const auto lower = kchol.llt.matrixL();
    const auto upper = kchol.llt.matrixU();
    const PsiBundle psi = psi_stats(ard, train, inducing);
    Matrix pm = lower.solve(Matrix(lower.solve(psi.psi2).transpose()));
    pm = 0.5 * (pm + pm.transpose());
    Matrix bm = beta * pm;
    bm.diagonal().array() += 1.0;
    const auto bchol = checked_cholesky(bm, "I + beta L^-1 Psi2 L^-T");
    const Matrix ey = lower.solve(Matrix(psi.psi1.transpose() * y_train));
    const Matrix b = beta * upper.solve(bchol.solve(ey));  // A^-1 Psi1^T Y, M x D'
    // K^-1 - A^-1 / beta = beta L^-T B^-1 P L^-1
    Matrix inner = beta * bchol.solve(pm);
    inner = 0.5 * (inner + inner.transpose());
    const Matrix shrink = upper.solve(Matrix(upper.solve(inner).transpose()));

    const Matrix p1 = psi1(ard, test, inducing);  // N* x M
    OutputMoments out{p1 * b, Matrix(test.size(), y_train.cols())};
    for (Eigen::Index n = 0; n < test.size(); ++n) {
        const Matrix p2 = psi2_point(ard, test, inducing, n);
        const Matrix c = p2 - p1.row(n).transpose() * p1.row(n);
        const double shared = ard.variance - shrink.cwiseProduct(p2).sum();
        const Vector quad = b.cwiseProduct(c * b).colwise().sum().transpose();
        out.var.row(n) = ((quad.array() + shared).cwiseMax(0.0) + 1.0 / beta).transpose();
    }
    return out;
}

std::vector<Eigen::Index> iota_rows(Eigen::Index from, Eigen::Index to) {
    std::vector<Eigen::Index> r(static_cast<std::size_t>(to - from));
    std::iota(r.begin(), r.end(), from);
    return r;
}

Matrix select_columns(const Matrix &y, const std::vector<int> &cols) {
    Matrix out(y.rows(), static_cast<Eigen::Index>(cols.size()));
    for (std::size_t j = 0; j < cols.size(); ++j) { out.col(static_cast<Eigen::Index>(j)) = y.col(cols[j]); }
    return out;
}

PredictiveMoments predict_columns(const VgpdsModel &model, const Vector &t_star, int sequence,
                                  const std::vector<int> &cols) {
    model.validate();
    PredictiveMoments pm;
    pm.latent = latent_moments(model.prior, model.state, t_star, sequence_id(model.prior, sequence));
    pm.columns = cols;
    const auto posts = implied_posteriors(model.prior, model.state);
    const MomentSet train = moments_for_rows(posts, iota_rows(0, model.num_points()));
    const auto om = output_moments(model.ard, model.beta, model.state.inducing, train,
                                   select_columns(model.y, cols), MomentSet{pm.latent.mean, pm.latent.var});
    Vector off(static_cast<Eigen::Index>(cols.size()));
    for (std::size_t j = 0; j < cols.size(); ++j) { off[static_cast<Eigen::Index>(j)] = model.offset[cols[j]]; }
    pm.mean = om.mean.rowwise() + off.transpose();
    pm.var = om.var;
    return pm;
}

}  // namespace

LatentForecast forecast_latent(const VgpdsModel &model, const Vector &t_star, int sequence) {
    model.validate();
    return latent_moments(model.prior, model.state, t_star, sequence_id(model.prior, sequence));
}

PredictiveMoments forecast_outputs(const VgpdsModel &model, const Vector &t_star, int sequence) {
    std::vector<int> cols(static_cast<std::size_t>(model.output_dims()));
    std::iota(cols.begin(), cols.end(), 0);
    return predict_columns(model, t_star, sequence, cols);
}

Reconstruction reconstruct_missing(const VgpdsModel &model, const Vector &t_star, const Matrix &y_observed,
                                   const std::vector<int> &observed, const ReconstructConfig &config) {
    model.validate();
    config.optimizer.validate();
    const Eigen::Index d = model.output_dims();
    const Eigen::Index n = model.num_points();
    const Eigen::Index ns = t_star.size();
    if (observed.empty()) { throw ValidationError("at least one observed column is required"); }
    std::vector<int> obs = observed;
    std::sort(obs.begin(), obs.end());
    if (std::adjacent_find(obs.begin(), obs.end()) != obs.end() || obs.front() < 0 || obs.back() >= d) {
        throw ValidationError("observed columns must be distinct indices in 0.." + std::to_string(d - 1));
    }
    if (obs != observed) { throw ValidationError("observed columns must be sorted ascending"); }
    if (y_observed.rows() != ns || y_observed.cols() != static_cast<Eigen::Index>(obs.size())) {
        throw ValidationError("observed test block must be N* x |observed|");
    }
    if (!y_observed.allFinite() || !t_star.allFinite()) {
        throw ValidationError("test data must be finite");
    }

    Reconstruction rec;
    for (int j = 0; j < d; ++j) {
        if (!std::binary_search(obs.begin(), obs.end(), j)) { rec.missing.push_back(j); }
    }
    if (rec.missing.empty()) {
        rec.moments.latent = {Matrix(ns, model.latent_dims()), Matrix(ns, model.latent_dims())};
        rec.moments.mean.resize(ns, 0);
        rec.moments.var.resize(ns, 0);
        return rec;
    }
    int total_iters = config.optimizer.warmup_iters;
    for (int it : config.optimizer.schedule) { total_iters += it; }
    if (total_iters == 0) {
        rec.moments = predict_columns(model, t_star, config.sequence, rec.missing);
        return rec;
    }

    // Joint prior over [t; t*].
    const int star_id = sequence_id(model.prior, config.sequence);
    Vector t_all(n + ns);
    t_all << model.prior.times, t_star;
    std::vector<int> ids = model.prior.seq_ids;
    ids.insert(ids.end(), static_cast<std::size_t>(ns), star_id);
    const TemporalPrior joint = build_prior(model.prior.spec, t_all, ids);

    // Initial latent means: trained means for training rows; for test rows the
    // temporal forecast when continuing a sequence, otherwise the latent mean of
    // the nearest training row in the observed columns.
    const auto posts = implied_posteriors(model.prior, model.state);
    const Eigen::Index nq = model.latent_dims();
    Matrix mu(n + ns, nq);
    for (Eigen::Index q = 0; q < nq; ++q) { mu.col(q).head(n) = posts[q].mean; }
    Matrix y_obs_c = y_observed;
    for (std::size_t j = 0; j < obs.size(); ++j) {
        y_obs_c.col(static_cast<Eigen::Index>(j)).array() -= model.offset[obs[j]];
    }
    const Matrix y_train_p = select_columns(model.y, obs);
    if (config.sequence != kNewSequence) {
        mu.bottomRows(ns) = latent_moments(model.prior, model.state, t_star, star_id).mean;
    } else {
        for (Eigen::Index i = 0; i < ns; ++i) {
            Eigen::Index best = 0;
            (y_train_p.rowwise() - y_obs_c.row(i)).rowwise().squaredNorm().minCoeff(&best);
            mu.row(n + i) = mu.row(best);
        }
    }
    const double lam0 = config.test_lambda > 0.0 ? config.test_lambda : model.state.lambda.mean();

    VgpdsModel work;
    work.prior = joint;
    work.ard = model.ard;
    work.beta = model.beta;
    if (config.init_smoothing > 0.0) {
        Matrix ks = joint.gram;
        ks.diagonal().array() += config.init_smoothing;
        work.state.mu_bar = checked_cholesky(ks, "smoothed K_t").solve(mu);
    } else {
        work.state.mu_bar = joint.chol.llt.solve(mu);
    }
    // A new sequence leaves the joint prior block diagonal, so the trained
    // training-row parameters are reproduced exactly.
    if (config.sequence == kNewSequence) { work.state.mu_bar.topRows(n) = model.state.mu_bar; }
    work.state.lambda.resize(n + ns, nq);
    work.state.lambda.topRows(n) = model.state.lambda;
    work.state.lambda.bottomRows(ns).setConstant(lam0);
    work.state.inducing = model.state.inducing;
    // Data rows are carried by the blocks; `y` only fixes the row count.
    work.y = Matrix::Zero(n + ns, d);
    work.offset = model.offset;
    const Matrix y_train_m = select_columns(model.y, rec.missing);
    Matrix y_joint_p(n + ns, static_cast<Eigen::Index>(obs.size()));
    y_joint_p << y_train_p, y_obs_c;
    work.blocks.push_back({iota_rows(0, n), precompute_data_term(y_train_m)});
    work.blocks.push_back({iota_rows(0, n + ns), precompute_data_term(y_joint_p)});

    TrainConfig tc = config.optimizer;
    tc.frozen.insert({ParamGroup::inducing, ParamGroup::theta_f, ParamGroup::theta_x, ParamGroup::beta});
    auto result = train(work, tc);
    rec.status = result.status;
    rec.trace = std::move(result.trace);
    rec.optimized = true;

    const auto jposts = implied_posteriors(result.model.prior, result.model.state);
    const MomentSet train_mo = moments_for_rows(jposts, iota_rows(0, n));
    const MomentSet test_mo = moments_for_rows(jposts, iota_rows(n, n + ns));
    const auto om = output_moments(model.ard, model.beta, model.state.inducing, train_mo, y_train_m, test_mo);
    rec.moments.latent = {test_mo.mean, test_mo.var};
    rec.moments.columns = rec.missing;
    rec.moments.mean = om.mean;
    for (std::size_t j = 0; j < rec.missing.size(); ++j) {
        rec.moments.mean.col(static_cast<Eigen::Index>(j)).array() += model.offset[rec.missing[j]];
    }
    rec.moments.var = om.var;
    return rec;
}

}  // namespace vgpds
