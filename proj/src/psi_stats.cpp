#include "vgpds/psi_stats.hpp"

#include <cmath>
#include <string>
#include <vector>

#include "vgpds/error.hpp"
#include "vgpds/parallel.hpp"

namespace vgpds {

namespace {

// Rows per work item. Fixed so that the reduction order never depends on the
// number of threads.
constexpr Eigen::Index kChunk = 8;

void check_inputs(const ArdKernelParams &params, const MomentSet &moments, const Matrix &inducing) {
    params.validate();
    moments.validate(params.dims());
    if (inducing.cols() != params.dims()) {
        throw ValidationError("inducing inputs need " + std::to_string(params.dims()) + " columns");
    }
}

// exp(-1/4 sum_q w_q (z_m - z_m')^2)
Matrix inducing_pair_factor(const ArdKernelParams &params, const Matrix &z) {
    const Eigen::Index m = z.rows();
    Matrix e(m, m);
    for (Eigen::Index b = 0; b < m; ++b) {
        for (Eigen::Index a = 0; a <= b; ++a) {
            double r = 0.0;
            for (Eigen::Index q = 0; q < z.cols(); ++q) {
                const double d = z(a, q) - z(b, q);
                r += params.weights[q] * d * d;
            }
            e(a, b) = e(b, a) = std::exp(-0.25 * r);
        }
    }
    return e;
}

// Upper triangle (a <= b) of the per-point psi2 term for row n.
void psi2_row(const ArdKernelParams &params, const MomentSet &mo, const Matrix &z, const Matrix &pair,
              Eigen::Index n, Matrix &out) {
    const Eigen::Index m = z.rows();
    const Eigen::Index dims = params.dims();
    double pref = params.variance * params.variance;
    for (Eigen::Index q = 0; q < dims; ++q) { pref /= std::sqrt(2.0 * params.weights[q] * mo.var(n, q) + 1.0); }
    for (Eigen::Index b = 0; b < m; ++b) {
        for (Eigen::Index a = 0; a <= b; ++a) {
            double r = 0.0;
            for (Eigen::Index q = 0; q < dims; ++q) {
                const double w = params.weights[q];
                const double d = mo.mean(n, q) - 0.5 * (z(a, q) + z(b, q));
                r += w * d * d / (2.0 * w * mo.var(n, q) + 1.0);
            }
            out(a, b) = pref * pair(a, b) * std::exp(-r);
        }
    }
}

}  // namespace

void MomentSet::validate(Eigen::Index latent_dims) const {
    if (mean.cols() != latent_dims || var.cols() != latent_dims || var.rows() != mean.rows()) {
        throw ValidationError("moment set shape does not match the latent dimensionality");
    }
    if (!mean.allFinite() || !var.allFinite() || (var.array() < 0.0).any()) {
        throw ValidationError("moment set needs finite means and non-negative variances");
    }
}

double psi0(const ArdKernelParams &params, const MomentSet &moments) {
    params.validate();
    return static_cast<double>(moments.size()) * params.variance;
}

Matrix psi1(const ArdKernelParams &params, const MomentSet &mo, const Matrix &z) {
    check_inputs(params, mo, z);
    Matrix out(mo.size(), z.rows());
    for (Eigen::Index n = 0; n < mo.size(); ++n) {
        double pref = params.variance;
        for (Eigen::Index q = 0; q < params.dims(); ++q) { pref /= std::sqrt(params.weights[q] * mo.var(n, q) + 1.0); }
        for (Eigen::Index m = 0; m < z.rows(); ++m) {
            double r = 0.0;
            for (Eigen::Index q = 0; q < params.dims(); ++q) {
                const double w = params.weights[q];
                const double d = mo.mean(n, q) - z(m, q);
                r += w * d * d / (w * mo.var(n, q) + 1.0);
            }
            out(n, m) = pref * std::exp(-0.5 * r);
        }
    }
    return out;
}

Matrix psi2_point(const ArdKernelParams &params, const MomentSet &mo, const Matrix &z, Eigen::Index n) {
    check_inputs(params, mo, z);
    const Matrix pair = inducing_pair_factor(params, z);
    Matrix out(z.rows(), z.rows());
    psi2_row(params, mo, z, pair, n, out);
    return out.selfadjointView<Eigen::Upper>();
}

Matrix psi2(const ArdKernelParams &params, const MomentSet &mo, const Matrix &z) {
    check_inputs(params, mo, z);
    const Eigen::Index m = z.rows();
    const Matrix pair = inducing_pair_factor(params, z);
    const auto chunks = static_cast<std::size_t>((mo.size() + kChunk - 1) / kChunk);
    std::vector<Matrix> partial(chunks, Matrix::Zero(m, m));
    parallel_for(chunks, [&](std::size_t c) {
        Matrix row(m, m);
        const Eigen::Index end = std::min<Eigen::Index>(mo.size(), (c + 1) * kChunk);
        for (Eigen::Index n = static_cast<Eigen::Index>(c) * kChunk; n < end; ++n) {
            psi2_row(params, mo, z, pair, n, row);
            partial[c].triangularView<Eigen::Upper>() += row;
        }
    });
    Matrix out = Matrix::Zero(m, m);
    for (const auto &p : partial) { out += p; }
    return out.selfadjointView<Eigen::Upper>();
}

PsiBundle psi_stats(const ArdKernelParams &params, const MomentSet &moments, const Matrix &inducing) {
    return {psi0(params, moments), psi1(params, moments, inducing), psi2(params, moments, inducing)};
}

PsiStar psi_star(const ArdKernelParams &params, const MomentSet &test_moments, const Matrix &inducing) {
    return {psi0(params, test_moments), psi1(params, test_moments, inducing).transpose(),
            psi2(params, test_moments, inducing)};
}

namespace {

struct GradPartial {
    double d_variance = 0.0;
    Vector d_weights;
    Matrix d_inducing;
};

}  // namespace

PsiGradient psi_grads(const ArdKernelParams &params, const MomentSet &mo, const Matrix &z, double g0,
                      const Matrix &g1, const Matrix &g2) {
    check_inputs(params, mo, z);
    const Eigen::Index n_pts = mo.size();
    const Eigen::Index m = z.rows();
    const Eigen::Index dims = params.dims();
    if (g1.rows() != n_pts || g1.cols() != m || g2.rows() != m || g2.cols() != m) {
        throw ValidationError("psi gradient weights have the wrong shape");
    }
    const double s2 = params.variance;
    const Vector &w = params.weights;
    const Matrix g2s = 0.5 * (g2 + g2.transpose());
    const Matrix pair = inducing_pair_factor(params, z);

    PsiGradient out;
    out.d_mean = Matrix::Zero(n_pts, dims);
    out.d_var = Matrix::Zero(n_pts, dims);

    const auto chunks = static_cast<std::size_t>((n_pts + kChunk - 1) / kChunk);
    std::vector<GradPartial> partial(chunks);
    parallel_for(chunks, [&](std::size_t c) {
        GradPartial &acc = partial[c];
        acc.d_weights = Vector::Zero(dims);
        acc.d_inducing = Matrix::Zero(m, dims);
        Matrix t2(m, m);
        const Eigen::Index end = std::min<Eigen::Index>(n_pts, (c + 1) * kChunk);
        for (Eigen::Index n = static_cast<Eigen::Index>(c) * kChunk; n < end; ++n) {
            // psi1 terms
            double pref = s2;
            for (Eigen::Index q = 0; q < dims; ++q) { pref /= std::sqrt(w[q] * mo.var(n, q) + 1.0); }
            for (Eigen::Index k = 0; k < m; ++k) {
                double r = 0.0;
                for (Eigen::Index q = 0; q < dims; ++q) {
                    const double d = mo.mean(n, q) - z(k, q);
                    r += w[q] * d * d / (w[q] * mo.var(n, q) + 1.0);
                }
                const double cw = g1(n, k) * pref * std::exp(-0.5 * r);
                acc.d_variance += cw / s2;
                for (Eigen::Index q = 0; q < dims; ++q) {
                    const double den = w[q] * mo.var(n, q) + 1.0;
                    const double d = mo.mean(n, q) - z(k, q);
                    out.d_mean(n, q) += cw * (-w[q] * d / den);
                    out.d_var(n, q) += cw * (-0.5 * w[q] / den + 0.5 * w[q] * w[q] * d * d / (den * den));
                    acc.d_inducing(k, q) += cw * (w[q] * d / den);
                    acc.d_weights[q] += cw * (-0.5 * mo.var(n, q) / den - 0.5 * d * d / (den * den));
                }
            }
            // psi2 terms
            psi2_row(params, mo, z, pair, n, t2);
            for (Eigen::Index b = 0; b < m; ++b) {
                for (Eigen::Index a = 0; a <= b; ++a) {
                    const double cw = (a == b ? 1.0 : 2.0) * g2s(a, b) * t2(a, b);
                    acc.d_variance += 2.0 * cw / s2;
                    for (Eigen::Index q = 0; q < dims; ++q) {
                        const double den = 2.0 * w[q] * mo.var(n, q) + 1.0;
                        const double d = mo.mean(n, q) - 0.5 * (z(a, q) + z(b, q));
                        const double dz = z(a, q) - z(b, q);
                        out.d_mean(n, q) += cw * (-2.0 * w[q] * d / den);
                        out.d_var(n, q) += cw * (-w[q] / den + 2.0 * w[q] * w[q] * d * d / (den * den));
                        acc.d_weights[q] += cw * (-mo.var(n, q) / den - 0.25 * dz * dz - d * d / (den * den));
                        acc.d_inducing(a, q) += cw * (-0.5 * w[q] * dz + w[q] * d / den);
                        acc.d_inducing(b, q) += cw * (0.5 * w[q] * dz + w[q] * d / den);
                    }
                }
            }
        }
    });

    out.d_variance = g0 * static_cast<double>(n_pts);
    out.d_weights = Vector::Zero(dims);
    out.d_inducing = Matrix::Zero(m, dims);
    for (const auto &p : partial) {
        out.d_variance += p.d_variance;
        out.d_weights += p.d_weights;
        out.d_inducing += p.d_inducing;
    }
    return out;
}

}  // namespace vgpds
