#include "vgpds/baseline.hpp"

#include <algorithm>
#include <numeric>
#include <vector>

#include "vgpds/error.hpp"

namespace vgpds {

Matrix nn_baseline(const Matrix &train_observed, const Matrix &train_missing, const Matrix &test_observed, int k) {
    const Eigen::Index n = train_observed.rows();
    if (n == 0) { throw ValidationError("nearest-neighbour baseline needs a non-empty training set"); }
    if (k < 1) { throw ValidationError("k must be at least 1"); }
    if (train_missing.rows() != n) { throw ValidationError("training blocks disagree on the number of rows"); }
    if (test_observed.cols() != train_observed.cols()) {
        throw ValidationError("test rows must have the same observed columns as the training rows");
    }
    const auto kk = std::min<Eigen::Index>(k, n);
    Matrix out(test_observed.rows(), train_missing.cols());
    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < test_observed.rows(); ++i) {
        const Vector dist = (train_observed.rowwise() - test_observed.row(i)).rowwise().squaredNorm();
        std::iota(order.begin(), order.end(), Eigen::Index{0});
        std::partial_sort(order.begin(), order.begin() + kk, order.end(), [&](Eigen::Index a, Eigen::Index b) {
            return dist[a] < dist[b] || (dist[a] == dist[b] && a < b);
        });
        Eigen::RowVectorXd acc = Eigen::RowVectorXd::Zero(train_missing.cols());
        for (Eigen::Index j = 0; j < kk; ++j) { acc += train_missing.row(order[static_cast<std::size_t>(j)]); }
        out.row(i) = acc / static_cast<double>(kk);
    }
    return out;
}

}  // namespace vgpds
