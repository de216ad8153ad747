#pragma once

#include <string>
#include <vector>

#include "vgpds/linalg.hpp"

namespace vgpds {

struct MetricOptions {
    // Columns holding angles in degrees; empty means none.
    std::vector<bool> angle_columns;
    // Per-column scale for the cumulative error; empty means unit weights.
    Vector weights;
    std::string baseline;  // identity of the method being scored, copied to the report
    int k = 0;
};

/// Errors over the entries given (the missing entries only; callers pass the
/// missing columns of reconstruction and ground truth).
struct MetricReport {
    Eigen::Index entries = 0;
    double mse = 0.0;         // mean squared error per entry
    double angle_rms = 0.0;   // RMS of wrapped angle differences, 0 without angle columns
    Eigen::Index angle_entries = 0;
    Vector cumulative;        // per column: sum over rows of (w_j (recon - truth))^2
    double cumulative_total = 0.0;
    std::string baseline;
    int k = 0;
};

// Difference of two angles in degrees mapped to [-180, 180).
double wrap_degrees(double diff);

MetricReport evaluate(const Matrix &recon, const Matrix &truth, const MetricOptions &options = {});

}  // namespace vgpds
