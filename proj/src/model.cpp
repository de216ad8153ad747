#include "vgpds/model.hpp"

#include <algorithm>
#include <numeric>
#include <random>

#include "vgpds/error.hpp"

namespace vgpds {

void VgpdsModel::set_temporal_kernel(const TemporalKernelSpec &spec) {
    prior = build_prior(spec, prior.times, prior.seq_ids);
}

BoundProblem VgpdsModel::problem() const { return {&prior, &ard, beta, &state, &blocks}; }

void VgpdsModel::validate() const {
    if (!(beta > 0.0) || !std::isfinite(beta)) { throw ValidationError("beta must be positive"); }
    state.validate();
    ard.validate();
    if (state.num_points() != y.rows() || prior.size() != y.rows()) {
        throw ValidationError("model: data, prior and variational state disagree on N");
    }
    if (state.num_inducing() > y.rows()) { throw ValidationError("model: more inducing points than data points"); }
}

VgpdsModel assemble_model(const TemporalPrior &prior, const ArdKernelParams &ard, double beta,
                          const VariationalState &state, const Matrix &y) {
    VgpdsModel m;
    m.prior = prior;
    m.ard = ard;
    m.beta = beta;
    m.state = state;
    m.y = y;
    m.offset = Vector::Zero(y.cols());
    std::vector<Eigen::Index> rows(static_cast<std::size_t>(y.rows()));
    std::iota(rows.begin(), rows.end(), Eigen::Index{0});
    m.blocks.push_back({std::move(rows), precompute_data_term(y)});
    for (Eigen::Index j = 0; j < y.cols(); ++j) { m.names.push_back("y" + std::to_string(j + 1)); }
    m.validate();
    return m;
}

VgpdsModel make_model(const TimeSeriesDataset &data, const ModelConfig &config) {
    data.validate();
    const Eigen::Index n = data.size();
    const Eigen::Index d = data.dims();
    const Eigen::Index q = config.latent_dims;
    if (n < 3) { throw ValidationError("at least 3 observations are required, got " + std::to_string(n)); }
    if (q < 1) { throw ValidationError("latent dimensionality must be positive"); }
    if (d < q) {
        throw ValidationError("output dimensionality D=" + std::to_string(d) + " is smaller than Q=" +
                              std::to_string(q));
    }
    if (n < q) { throw ValidationError("fewer observations than latent dimensions"); }
    if (!(config.lambda_init > 0.0)) { throw ValidationError("lambda_init must be positive"); }
    if (!(config.init_smoothing >= 0.0)) { throw ValidationError("init_smoothing must be >= 0"); }
    const Eigen::Index m = config.num_inducing > 0 ? config.num_inducing : std::min<Eigen::Index>(n, 50);
    if (m > n) { throw ValidationError("number of inducing points exceeds N"); }

    Vector offset = config.center ? Vector(data.y.colwise().mean().transpose()) : Vector(Vector::Zero(d));
    const Matrix yc = data.y.rowwise() - offset.transpose();

    // Top-Q principal component scores, each scaled to unit variance.
    Eigen::BDCSVD<Matrix> svd(yc, Eigen::ComputeThinU);
    Matrix mu = svd.matrixU().leftCols(q) * std::sqrt(static_cast<double>(n - 1));

    auto prior = build_prior(config.temporal, data.t, data.layout());

    VariationalState state;
    if (config.init_smoothing > 0.0) {
        Matrix ks = prior.gram;
        ks.diagonal().array() += config.init_smoothing;
        state.mu_bar = checked_cholesky(ks, "smoothed K_t").solve(mu);
    } else {
        state.mu_bar = prior.chol.llt.solve(mu);
    }
    state.lambda = Matrix::Constant(n, q, config.lambda_init);

    std::vector<Eigen::Index> idx(static_cast<std::size_t>(n));
    std::iota(idx.begin(), idx.end(), Eigen::Index{0});
    std::mt19937_64 rng(config.seed);
    std::shuffle(idx.begin(), idx.end(), rng);
    state.inducing.resize(m, q);
    for (Eigen::Index i = 0; i < m; ++i) { state.inducing.row(i) = mu.row(idx[static_cast<std::size_t>(i)]); }

    const double var_y = yc.squaredNorm() / static_cast<double>(std::max<Eigen::Index>(1, (n - 1) * d));
    const double beta = 1.0 / (0.01 * (var_y > 0.0 ? var_y : 1.0));

    VgpdsModel model = assemble_model(prior, ArdKernelParams(1.0, Vector::Ones(q)), beta, state, yc);
    model.offset = offset;
    model.names = data.names;
    model.checksum = data.checksum();
    return model;
}

BoundReport evaluate_bound(const VgpdsModel &model) { return evaluate_problem(model.problem()); }

BoundReport bound_gradients(const VgpdsModel &model, BoundGradient &grad) {
    return evaluate_problem(model.problem(), grad);
}

}  // namespace vgpds
