#pragma once

#include <Eigen/Dense>
#include <string_view>

namespace vgpds {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Relative jitter added to covariance matrices before factorization, and the
// single retry level used when the first attempt fails.
inline constexpr double kJitter = 1e-6;
inline constexpr double kJitterRetry = 1e-4;

// Cholesky factor of K + jitter * mean(diag K) * I.
struct JitteredCholesky {
    Eigen::LLT<Matrix> llt;
    double jitter = 0.0;         // absolute value added to the diagonal
    double relative_jitter = 0;  // kJitter or kJitterRetry

    double log_det() const;
};

// Throws NumericalError (naming `what`) if both jitter levels fail.
JitteredCholesky jittered_cholesky(const Matrix &k, std::string_view what);

// Plain Cholesky for matrices that are positive definite by construction.
Eigen::LLT<Matrix> checked_cholesky(const Matrix &a, std::string_view what);

double log_det(const Eigen::LLT<Matrix> &llt);

// Inverse of an SPD matrix from its factorization, symmetrized.
Matrix spd_inverse(const Eigen::LLT<Matrix> &llt);

}  // namespace vgpds
