#pragma once

#include "vgpds/kernels.hpp"
#include "vgpds/linalg.hpp"

namespace vgpds {

/// Per-point marginal moments of a factorized q(X): row n, column q holds the
/// mean and variance of x_{n,q}. Only the diagonals of S_q enter the
/// kernel expectations.
struct MomentSet {
    Matrix mean;  // N x Q
    Matrix var;   // N x Q, strictly positive

    Eigen::Index size() const { return mean.rows(); }
    void validate(Eigen::Index latent_dims) const;
};

/// Expectations of the ARD kernel matrices under q(X):
/// psi0 = Tr<K_NN>, psi1 = <K_NM> (N x M), psi2 = <K_MN K_NM> (M x M).
struct PsiBundle {
    double psi0 = 0.0;
    Matrix psi1;
    Matrix psi2;
};

double psi0(const ArdKernelParams &params, const MomentSet &moments);
Matrix psi1(const ArdKernelParams &params, const MomentSet &moments, const Matrix &inducing);
Matrix psi2(const ArdKernelParams &params, const MomentSet &moments, const Matrix &inducing);
PsiBundle psi_stats(const ArdKernelParams &params, const MomentSet &moments, const Matrix &inducing);

// <k(x_n, Z)^T k(x_n, Z)> for a single row n of the moment set.
Matrix psi2_point(const ArdKernelParams &params, const MomentSet &moments, const Matrix &inducing,
                  Eigen::Index n);

/// Test-time statistics. psi1 is stored M x N*, the orientation used by
/// E(F*) = B^T psi1.
struct PsiStar {
    double psi0 = 0.0;
    Matrix psi1;  // M x N*
    Matrix psi2;  // M x M, summed over test points
};

PsiStar psi_star(const ArdKernelParams &params, const MomentSet &test_moments, const Matrix &inducing);

/// Vector-Jacobian product of the statistics: gradients of
///   g0 * psi0 + sum(g1 .* psi1) + sum(g2 .* psi2)
/// with respect to every input.
struct PsiGradient {
    double d_variance = 0.0;
    Vector d_weights;    // Q
    Matrix d_inducing;   // M x Q
    Matrix d_mean;       // N x Q
    Matrix d_var;        // N x Q
};

PsiGradient psi_grads(const ArdKernelParams &params, const MomentSet &moments, const Matrix &inducing, double g0,
                      const Matrix &g1, const Matrix &g2);

}  // namespace vgpds
