#include "vgpds/checkpoint.hpp"

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "vgpds/error.hpp"

namespace vgpds {

using nlohmann::json;

namespace {

constexpr int kFormatVersion = 1;

json matrix_to_json(const Matrix &m) {
    json rows = json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        json r = json::array();
        for (Eigen::Index j = 0; j < m.cols(); ++j) { r.push_back(m(i, j)); }
        rows.push_back(std::move(r));
    }
    return rows;
}

Matrix matrix_from_json(const json &j, Eigen::Index rows, Eigen::Index cols, const char *what) {
    if (!j.is_array() || static_cast<Eigen::Index>(j.size()) != rows) {
        throw ValidationError(std::string("checkpoint field '") + what + "' must have " + std::to_string(rows) +
                              " rows");
    }
    Matrix m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i) {
        const auto &r = j[static_cast<std::size_t>(i)];
        if (!r.is_array() || static_cast<Eigen::Index>(r.size()) != cols) {
            throw ValidationError(std::string("checkpoint field '") + what + "' must have " + std::to_string(cols) +
                                  " columns");
        }
        for (Eigen::Index c = 0; c < cols; ++c) { m(i, c) = r[static_cast<std::size_t>(c)].get<double>(); }
    }
    return m;
}

json vector_to_json(const Vector &v) { return json(std::vector<double>(v.data(), v.data() + v.size())); }

Vector vector_from_json(const json &j) {
    const auto v = j.get<std::vector<double>>();
    return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

std::string hex64(std::uint64_t v) {
    std::ostringstream os;
    os << std::hex << std::setw(16) << std::setfill('0') << v;
    return os.str();
}

}  // namespace

json temporal_kernel_to_json(const TemporalKernelSpec &spec) {
    json j;
    j["family"] = std::string(family_name(spec.family));
    switch (spec.family) {
    case TemporalFamily::Sum: {
        j["components"] = json::array();
        for (const auto &c : spec.components) { j["components"].push_back(temporal_kernel_to_json(c)); }
        return j;
    }
    case TemporalFamily::Periodic:
        j["variance"] = spec.variance;
        j["lengthscale"] = spec.lengthscale;
        j["period"] = spec.period;
        if (spec.optimize_period) { j["optimize_period"] = true; }
        break;
    case TemporalFamily::Rbf:
    case TemporalFamily::Matern32:
        j["variance"] = spec.variance;
        j["lengthscale"] = spec.lengthscale;
        break;
    case TemporalFamily::White:
    case TemporalFamily::Bias: j["variance"] = spec.variance; break;
    }
    if (spec.fixed) { j["fixed"] = true; }
    return j;
}

TemporalKernelSpec temporal_kernel_from_json(const json &j) {
    try {
        if (!j.is_object() || !j.contains("family")) {
            throw ValidationError("kernel spec must be an object with a \"family\" field");
        }
        TemporalKernelSpec s;
        s.family = family_from_name(j.at("family").get<std::string>());
        if (s.family == TemporalFamily::Sum) {
            if (!j.contains("components") || !j.at("components").is_array()) {
                throw ValidationError("sum kernel needs a \"components\" array");
            }
            for (const auto &c : j.at("components")) { s.components.push_back(temporal_kernel_from_json(c)); }
        } else {
            s.variance = j.at("variance").get<double>();
            if (s.family == TemporalFamily::Rbf || s.family == TemporalFamily::Matern32 ||
                s.family == TemporalFamily::Periodic) {
                s.lengthscale = j.at("lengthscale").get<double>();
            }
            if (s.family == TemporalFamily::Periodic) {
                s.period = j.at("period").get<double>();
                s.optimize_period = j.value("optimize_period", false);
            }
            s.fixed = j.value("fixed", false);
        }
        s.validate();
        return s;
    } catch (const json::exception &e) {
        throw ValidationError(std::string("invalid kernel spec: ") + e.what());
    }
}

TemporalKernelSpec parse_temporal_kernel(const std::string &text) {
    std::string doc = text;
    if (!text.empty() && text.front() == '@') {
        std::ifstream in(text.substr(1));
        if (!in) { throw ValidationError("cannot open kernel file " + text.substr(1)); }
        std::stringstream ss;
        ss << in.rdbuf();
        doc = ss.str();
    }
    json j;
    try {
        j = json::parse(doc);
    } catch (const json::parse_error &e) {
        throw ValidationError(std::string("kernel spec is not valid JSON: ") + e.what());
    }
    return temporal_kernel_from_json(j);
}

json model_to_json(const VgpdsModel &model) {
    model.validate();
    json j;
    j["format"] = "vgpds-model";
    j["version"] = kFormatVersion;
    j["temporal_kernel"] = temporal_kernel_to_json(model.prior.spec);
    j["mapping_kernel"] = {{"family", "rbf_ard"},
                           {"variance", model.ard.variance},
                           {"weights", vector_to_json(model.ard.weights)}};
    j["beta"] = model.beta;
    j["num_points"] = model.num_points();
    j["output_dims"] = model.output_dims();
    j["latent_dims"] = model.latent_dims();
    j["num_inducing"] = model.num_inducing();
    j["times"] = vector_to_json(model.prior.times);
    j["sequence_ids"] = model.prior.seq_ids;
    json layout = json::array();
    for (const auto &[a, b] : SequenceLayout::from_ids(model.prior.seq_ids).ranges) { layout.push_back({a, b}); }
    j["layout"] = layout;
    j["mu_bar"] = matrix_to_json(model.state.mu_bar);
    j["lambda"] = matrix_to_json(model.state.lambda);
    j["inducing"] = matrix_to_json(model.state.inducing);
    j["offset"] = vector_to_json(model.offset);
    j["columns"] = model.names;
    j["dataset"] = {{"path", model.dataset_path}, {"checksum", hex64(model.checksum)}};
    return j;
}

VgpdsModel model_from_json(const json &j, const TimeSeriesDataset &data) {
    try {
        if (j.value("format", std::string()) != "vgpds-model") {
            throw ValidationError("not a model checkpoint (missing \"format\": \"vgpds-model\")");
        }
        if (j.at("version").get<int>() != kFormatVersion) {
            throw ValidationError("unsupported checkpoint version " + j.at("version").dump());
        }
        const auto n = j.at("num_points").get<Eigen::Index>();
        const auto d = j.at("output_dims").get<Eigen::Index>();
        const auto q = j.at("latent_dims").get<Eigen::Index>();
        const auto m = j.at("num_inducing").get<Eigen::Index>();
        data.validate();
        const std::string expected = j.at("dataset").at("checksum").get<std::string>();
        if (hex64(data.checksum()) != expected || data.size() != n || data.dims() != d) {
            throw ValidationError("dataset does not match the checkpoint (checksum " + hex64(data.checksum()) +
                                  ", expected " + expected + ")");
        }
        const auto spec = temporal_kernel_from_json(j.at("temporal_kernel"));
        const auto &mk = j.at("mapping_kernel");
        if (mk.at("family").get<std::string>() != "rbf_ard") {
            throw ValidationError("unsupported mapping kernel family");
        }
        const ArdKernelParams ard(mk.at("variance").get<double>(), vector_from_json(mk.at("weights")));
        const Vector times = vector_from_json(j.at("times"));
        const auto ids = j.at("sequence_ids").get<std::vector<int>>();
        VariationalState state;
        state.mu_bar = matrix_from_json(j.at("mu_bar"), n, q, "mu_bar");
        state.lambda = matrix_from_json(j.at("lambda"), n, q, "lambda");
        state.inducing = matrix_from_json(j.at("inducing"), m, q, "inducing");
        const Vector offset = vector_from_json(j.at("offset"));
        if (offset.size() != d) { throw ValidationError("checkpoint offset has the wrong length"); }

        const Matrix yc = data.y.rowwise() - offset.transpose();
        VgpdsModel model =
            assemble_model(build_prior(spec, times, ids), ard, j.at("beta").get<double>(), state, yc);
        model.offset = offset;
        model.names = j.at("columns").get<std::vector<std::string>>();
        model.checksum = data.checksum();
        model.dataset_path = j.at("dataset").value("path", std::string());
        return model;
    } catch (const json::exception &e) {
        throw ValidationError(std::string("malformed checkpoint: ") + e.what());
    }
}

void save_model(const std::string &path, const VgpdsModel &model) {
    std::ofstream out(path);
    if (!out) { throw ValidationError("cannot write " + path); }
    out << model_to_json(model).dump(1) << "\n";
    if (!out) { throw ValidationError("failed writing " + path); }
}

VgpdsModel load_model(const std::string &path, const std::optional<std::string> &data_path) {
    std::ifstream in(path);
    if (!in) { throw ValidationError("cannot open model file " + path); }
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error &e) {
        throw ValidationError("model file " + path + " is not valid JSON: " + e.what());
    }
    std::string dpath = data_path.value_or(j.value("dataset", json::object()).value("path", std::string()));
    if (dpath.empty()) { throw ValidationError("checkpoint records no dataset path; pass the training data"); }
    if (!data_path && !std::filesystem::path(dpath).is_absolute()) {
        // relative paths are resolved against the checkpoint's directory
        const auto base = std::filesystem::path(path).parent_path();
        if (!std::filesystem::exists(dpath) && std::filesystem::exists(base / dpath)) { dpath = (base / dpath).string(); }
    }
    auto model = model_from_json(j, load_dataset(dpath));
    model.dataset_path = dpath;
    return model;
}

}  // namespace vgpds
