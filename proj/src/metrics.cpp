#include "vgpds/metrics.hpp"

#include <cmath>

#include "vgpds/error.hpp"

namespace vgpds {

double wrap_degrees(double diff) {
    double r = std::fmod(diff + 180.0, 360.0);
    if (r < 0.0) { r += 360.0; }
    return r - 180.0;
}

MetricReport evaluate(const Matrix &recon, const Matrix &truth, const MetricOptions &options) {
    if (recon.rows() != truth.rows() || recon.cols() != truth.cols()) {
        throw ValidationError("reconstruction is " + std::to_string(recon.rows()) + "x" +
                              std::to_string(recon.cols()) + " but ground truth is " + std::to_string(truth.rows()) +
                              "x" + std::to_string(truth.cols()));
    }
    if (!recon.allFinite() || !truth.allFinite()) { throw ValidationError("metrics need finite inputs"); }
    const Eigen::Index d = truth.cols();
    if (!options.angle_columns.empty() && static_cast<Eigen::Index>(options.angle_columns.size()) != d) {
        throw ValidationError("angle column mask has the wrong length");
    }
    if (options.weights.size() != 0 && options.weights.size() != d) {
        throw ValidationError("cumulative error weights have the wrong length");
    }
    MetricReport rep;
    rep.baseline = options.baseline;
    rep.k = options.k;
    rep.entries = recon.size();
    const Matrix diff = recon - truth;
    rep.mse = rep.entries ? diff.squaredNorm() / static_cast<double>(rep.entries) : 0.0;

    double angle_sq = 0.0;
    for (Eigen::Index j = 0; j < d; ++j) {
        if (options.angle_columns.empty() || !options.angle_columns[static_cast<std::size_t>(j)]) { continue; }
        for (Eigen::Index i = 0; i < diff.rows(); ++i) {
            const double a = wrap_degrees(diff(i, j));
            angle_sq += a * a;
            ++rep.angle_entries;
        }
    }
    rep.angle_rms = rep.angle_entries ? std::sqrt(angle_sq / static_cast<double>(rep.angle_entries)) : 0.0;

    const Vector w = options.weights.size() ? options.weights : Vector::Ones(d);
    rep.cumulative = (diff * w.asDiagonal()).colwise().squaredNorm().transpose();
    rep.cumulative_total = rep.cumulative.sum();
    return rep;
}

}  // namespace vgpds
