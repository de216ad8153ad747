#include "vgpds/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "vgpds/error.hpp"

namespace vgpds {

namespace {

std::string trim(std::string s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string::npos) { return {}; }
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

std::vector<std::string> split(const std::string &line) {
    std::vector<std::string> out;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) { out.push_back(trim(cell)); }
    if (!line.empty() && line.back() == ',') { out.emplace_back(); }
    return out;
}

}  // namespace

void TimeSeriesDataset::validate() const {
    if (t.size() != y.rows() || static_cast<Eigen::Index>(seq.size()) != y.rows()) {
        throw ValidationError("dataset: time stamps and sequence ids must have one entry per row");
    }
    if (static_cast<Eigen::Index>(names.size()) != y.cols()) {
        throw ValidationError("dataset: one name per feature column is required");
    }
    for (Eigen::Index j = 0; j < y.cols(); ++j) {
        for (Eigen::Index i = 0; i < y.rows(); ++i) {
            if (!std::isfinite(y(i, j))) {
                throw ValidationError("dataset: non-finite value at row " + std::to_string(i + 1) + ", column '" +
                                      names[j] + "'");
            }
        }
    }
    const auto layout = SequenceLayout::from_ids(seq);
    for (const auto &[a, b] : layout.ranges) {
        for (Eigen::Index i = a + 1; i < b; ++i) {
            if (!(t[i] > t[i - 1])) {
                throw ValidationError("dataset: time stamps must increase strictly within a sequence (row " +
                                      std::to_string(i + 1) + ")");
            }
        }
    }
}

std::uint64_t TimeSeriesDataset::checksum() const {
    std::uint64_t h = 1469598103934665603ULL;
    auto mix = [&h](const void *p, std::size_t n) {
        const auto *b = static_cast<const unsigned char *>(p);
        for (std::size_t i = 0; i < n; ++i) {
            h ^= b[i];
            h *= 1099511628211ULL;
        }
    };
    const Eigen::Index dims[2] = {y.rows(), y.cols()};
    mix(dims, sizeof(dims));
    mix(y.data(), sizeof(double) * static_cast<std::size_t>(y.size()));
    mix(t.data(), sizeof(double) * static_cast<std::size_t>(t.size()));
    mix(seq.data(), sizeof(int) * seq.size());
    return h;
}

TimeSeriesDataset parse_dataset(std::istream &in, const std::string &source) {
    std::string line;
    if (!std::getline(in, line)) { throw ValidationError(source + ": empty file, header expected"); }
    const auto header = split(line);
    int t_col = -1;
    int seq_col = -1;
    std::vector<int> feature_cols;
    TimeSeriesDataset data;
    for (std::size_t c = 0; c < header.size(); ++c) {
        if (header[c].empty()) { throw ValidationError(source + ": empty column name in header"); }
        if (header[c] == "t") {
            t_col = static_cast<int>(c);
        } else if (header[c] == "seq") {
            seq_col = static_cast<int>(c);
        } else {
            feature_cols.push_back(static_cast<int>(c));
            data.names.push_back(header[c]);
        }
    }

    std::vector<std::vector<double>> rows;
    std::vector<double> times;
    std::vector<int> ids;
    int line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) { continue; }
        const auto cells = split(line);
        if (cells.size() != header.size()) {
            throw ValidationError(source + ": line " + std::to_string(line_no) + " has " +
                                  std::to_string(cells.size()) + " fields, expected " +
                                  std::to_string(header.size()));
        }
        auto number = [&](std::size_t c) {
            const std::string &s = cells[c];
            double v = 0.0;
            const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
            if (ec != std::errc() || ptr != s.data() + s.size()) {
                throw ValidationError(source + ": line " + std::to_string(line_no) + ", column '" + header[c] +
                                      "': cannot parse '" + s + "'");
            }
            if (!std::isfinite(v)) {
                throw ValidationError(source + ": line " + std::to_string(line_no) + ", column '" + header[c] +
                                      "': non-finite value (row " + std::to_string(rows.size() + 1) + ")");
            }
            return v;
        };
        std::vector<double> row;
        row.reserve(feature_cols.size());
        for (int c : feature_cols) { row.push_back(number(static_cast<std::size_t>(c))); }
        if (t_col >= 0) { times.push_back(number(static_cast<std::size_t>(t_col))); }
        if (seq_col >= 0) {
            const double v = number(static_cast<std::size_t>(seq_col));
            if (v != std::floor(v)) {
                throw ValidationError(source + ": line " + std::to_string(line_no) + ": seq must be an integer");
            }
            ids.push_back(static_cast<int>(v));
        }
        rows.push_back(std::move(row));
    }

    const auto n = static_cast<Eigen::Index>(rows.size());
    data.y.resize(n, static_cast<Eigen::Index>(feature_cols.size()));
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < data.y.cols(); ++j) { data.y(i, j) = rows[i][j]; }
    }
    data.seq = seq_col >= 0 ? ids : std::vector<int>(rows.size(), 0);
    data.t.resize(n);
    if (t_col >= 0) {
        for (Eigen::Index i = 0; i < n; ++i) { data.t[i] = times[i]; }
    } else {
        double next = 1.0;
        for (Eigen::Index i = 0; i < n; ++i) {
            if (i > 0 && data.seq[i] != data.seq[i - 1]) { next = 1.0; }
            data.t[i] = next;
            next += 1.0;
        }
    }
    data.validate();
    return data;
}

TimeSeriesDataset load_dataset(const std::string &path, const std::string &format) {
    if (format != "csv") { throw ValidationError("unsupported dataset format '" + format + "'"); }
    std::ifstream in(path);
    if (!in) { throw ValidationError("cannot open dataset '" + path + "'"); }
    return parse_dataset(in, path);
}

void write_dataset(std::ostream &out, const TimeSeriesDataset &data) {
    out << "t,seq";
    for (const auto &n : data.names) { out << ',' << n; }
    out << '\n' << std::setprecision(17);
    for (Eigen::Index i = 0; i < data.size(); ++i) {
        out << data.t[i] << ',' << data.seq[i];
        for (Eigen::Index j = 0; j < data.dims(); ++j) { out << ',' << data.y(i, j); }
        out << '\n';
    }
}

void save_dataset(const std::string &path, const TimeSeriesDataset &data) {
    std::ofstream out(path);
    if (!out) { throw ValidationError("cannot write '" + path + "'"); }
    write_dataset(out, data);
}

std::vector<Eigen::Index> parse_column_selection(const std::string &spec, const std::vector<std::string> &names) {
    std::vector<Eigen::Index> cols;
    const auto dims = static_cast<Eigen::Index>(names.size());
    std::stringstream ss(spec);
    std::string item;
    auto as_index = [&](const std::string &s) -> Eigen::Index {
        Eigen::Index v = 0;
        const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
        if (ec != std::errc() || ptr != s.data() + s.size()) { return -1; }
        return v;
    };
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (item.empty()) { continue; }
        if (auto it = std::find(names.begin(), names.end(), item); it != names.end()) {
            cols.push_back(it - names.begin());
            continue;
        }
        const auto dash = item.find('-');
        Eigen::Index lo = -1;
        Eigen::Index hi = -1;
        if (dash != std::string::npos && dash > 0) {
            lo = as_index(item.substr(0, dash));
            hi = as_index(item.substr(dash + 1));
        } else {
            lo = hi = as_index(item);
        }
        if (lo < 1 || hi < lo || hi > dims) {
            throw ValidationError("column selection '" + item + "' matches no feature (1.." + std::to_string(dims) +
                                  ")");
        }
        for (Eigen::Index c = lo; c <= hi; ++c) { cols.push_back(c - 1); }
    }
    std::sort(cols.begin(), cols.end());
    cols.erase(std::unique(cols.begin(), cols.end()), cols.end());
    return cols;
}

std::vector<Eigen::Index> complement_columns(const std::vector<Eigen::Index> &cols, Eigen::Index dims) {
    std::vector<Eigen::Index> out;
    for (Eigen::Index c = 0; c < dims; ++c) {
        if (std::find(cols.begin(), cols.end(), c) == cols.end()) { out.push_back(c); }
    }
    return out;
}

}  // namespace vgpds
