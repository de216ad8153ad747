#include "vgpds/synth.hpp"

#include <cmath>
#include <random>

#include "vgpds/error.hpp"
#include "vgpds/temporal_prior.hpp"

namespace vgpds {

namespace {

Matrix standard_normal(std::mt19937_64 &rng, Eigen::Index r, Eigen::Index c) {
    std::normal_distribution<double> nd(0.0, 1.0);
    Matrix m(r, c);
    for (Eigen::Index j = 0; j < c; ++j) {
        for (Eigen::Index i = 0; i < r; ++i) { m(i, j) = nd(rng); }
    }
    return m;
}

}  // namespace

SynthSample synth_generate(const SynthConfig &cfg) {
    if (cfg.n < 1 || cfg.d < 1) { throw ValidationError("synthetic data needs N >= 1 and D >= 1"); }
    if (cfg.sequences < 1 || cfg.sequences > cfg.n) { throw ValidationError("invalid number of sequences"); }
    if (!(cfg.beta > 0.0)) { throw ValidationError("noise precision must be positive"); }
    if (!(cfg.time_step > 0.0)) { throw ValidationError("time step must be positive"); }
    cfg.temporal.validate();
    cfg.mapping.validate();

    SynthSample s;
    auto &data = s.data;
    data.y.resize(cfg.n, cfg.d);
    data.t.resize(cfg.n);
    data.seq.resize(static_cast<std::size_t>(cfg.n));
    Eigen::Index row = 0;
    for (Eigen::Index k = 0; k < cfg.sequences; ++k) {
        const Eigen::Index len = cfg.n / cfg.sequences + (k < cfg.n % cfg.sequences ? 1 : 0);
        for (Eigen::Index i = 0; i < len; ++i, ++row) {
            data.t[row] = cfg.time_step * static_cast<double>(i + 1);
            data.seq[static_cast<std::size_t>(row)] = static_cast<int>(k);
        }
    }
    for (Eigen::Index j = 0; j < cfg.d; ++j) { data.names.push_back("y" + std::to_string(j + 1)); }

    std::mt19937_64 rng(cfg.seed);
    const auto prior = build_prior(cfg.temporal, data.t, data.seq);
    const Eigen::Index q = cfg.mapping.dims();
    s.latent = prior.chol.llt.matrixL() * standard_normal(rng, cfg.n, q);
    const auto kchol = jittered_cholesky(ard_gram(cfg.mapping, s.latent, s.latent), "mapping gram K_NN");
    s.f = kchol.llt.matrixL() * standard_normal(rng, cfg.n, cfg.d);
    const Matrix noise = standard_normal(rng, cfg.n, cfg.d);
    data.y = std::isinf(cfg.beta) ? s.f : Matrix(s.f + noise / std::sqrt(cfg.beta));
    data.validate();
    return s;
}

}  // namespace vgpds
