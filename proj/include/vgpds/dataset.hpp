#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "vgpds/linalg.hpp"
#include "vgpds/temporal_prior.hpp"

namespace vgpds {

/// Observations Y (N x D) with time stamps and sequence ids. Rows of one
/// sequence are contiguous and strictly increasing in time.
struct TimeSeriesDataset {
    Matrix y;
    Vector t;
    std::vector<int> seq;
    std::vector<std::string> names;

    Eigen::Index size() const { return y.rows(); }
    Eigen::Index dims() const { return y.cols(); }
    SequenceLayout layout() const { return SequenceLayout::from_ids(seq); }

    void validate() const;
    // FNV-1a over Y, t and the sequence ids.
    std::uint64_t checksum() const;
};

/// CSV with a required header. Optional columns `t` and `seq`; every other
/// column is a feature. Missing `t` defaults to 1..n within each sequence,
/// missing `seq` puts every row in sequence 0.
TimeSeriesDataset parse_dataset(std::istream &in, const std::string &source = "<stream>");
TimeSeriesDataset load_dataset(const std::string &path, const std::string &format = "csv");
void write_dataset(std::ostream &out, const TimeSeriesDataset &data);
void save_dataset(const std::string &path, const TimeSeriesDataset &data);

/// Resolves a column selection such as "y1,y3" or "1-3,7" (1-based feature
/// positions) against the feature names.
std::vector<Eigen::Index> parse_column_selection(const std::string &spec, const std::vector<std::string> &names);

std::vector<Eigen::Index> complement_columns(const std::vector<Eigen::Index> &cols, Eigen::Index dims);

}  // namespace vgpds
