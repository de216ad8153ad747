#include "vgpds/linalg.hpp"

#include <string>

#include "vgpds/error.hpp"

namespace vgpds {

double log_det(const Eigen::LLT<Matrix> &llt) {
    return 2.0 * llt.matrixLLT().diagonal().array().log().sum();
}

double JitteredCholesky::log_det() const { return vgpds::log_det(llt); }

JitteredCholesky jittered_cholesky(const Matrix &k, std::string_view what) {
    const double scale = k.rows() > 0 ? k.diagonal().mean() : 0.0;
    for (const double rel : {kJitter, kJitterRetry}) {
        JitteredCholesky out;
        out.relative_jitter = rel;
        out.jitter = rel * scale;
        Matrix kj = k;
        kj.diagonal().array() += out.jitter;
        out.llt.compute(kj);
        if (out.llt.info() == Eigen::Success && std::isfinite(out.log_det())) { return out; }
    }
    throw NumericalError("Cholesky of " + std::string(what) + " failed after jitter retries");
}

Eigen::LLT<Matrix> checked_cholesky(const Matrix &a, std::string_view what) {
    Eigen::LLT<Matrix> llt(a);
    if (llt.info() != Eigen::Success || !std::isfinite(log_det(llt))) {
        throw NumericalError("Cholesky of " + std::string(what) + " failed");
    }
    return llt;
}

Matrix spd_inverse(const Eigen::LLT<Matrix> &llt) {
    Matrix inv = llt.solve(Matrix::Identity(llt.rows(), llt.rows()));
    return 0.5 * (inv + inv.transpose());
}

}  // namespace vgpds
