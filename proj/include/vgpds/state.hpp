#pragma once

#include "vgpds/linalg.hpp"

namespace vgpds {

/// Reparametrized variational parameters of q(X). Column q of `mu_bar` and
/// `lambda` holds the N-vectors for latent dimension q; the implied moments
/// are mu_q = K_t mu_bar_q and S_q = (K_t^-1 + diag(lambda_q))^-1.
struct VariationalState {
    Matrix mu_bar;     // N x Q
    Matrix lambda;     // N x Q, strictly positive
    Matrix inducing;   // M x Q

    Eigen::Index num_points() const { return mu_bar.rows(); }
    Eigen::Index latent_dims() const { return mu_bar.cols(); }
    Eigen::Index num_inducing() const { return inducing.rows(); }

    // Throws ValidationError on inconsistent shapes or non-positive lambda.
    void validate() const;
};

}  // namespace vgpds
