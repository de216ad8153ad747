// vgpds command line: training, prediction, baselines and evaluation.

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "vgpds/baseline.hpp"
#include "vgpds/checkpoint.hpp"
#include "vgpds/dataset.hpp"
#include "vgpds/error.hpp"
#include "vgpds/metrics.hpp"
#include "vgpds/optimizer.hpp"
#include "vgpds/predictor.hpp"
#include "vgpds/synth.hpp"

using namespace vgpds;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitValidation = 2;
constexpr int kExitNumerical = 3;

std::ofstream open_out(const std::string &path) {
    std::ofstream out(path);
    if (!out) { throw ValidationError("cannot write '" + path + "'"); }
    out << std::setprecision(17);
    return out;
}

std::vector<int> to_int(const std::vector<Eigen::Index> &v) { return {v.begin(), v.end()}; }

std::vector<std::string> split(const std::string &s, char sep) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, sep)) { out.push_back(item); }
    return out;
}

double parse_double(const std::string &s, const std::string &what) {
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(s, &used);
    } catch (const std::exception &) {
        used = 0;
    }
    if (used == 0 || used != s.size()) { throw ValidationError(what + ": '" + s + "' is not a number"); }
    return v;
}

// "new" or a 0-based index into the model's sequences.
int parse_sequence(const std::string &s) {
    if (s == "new") { return kNewSequence; }
    const double v = parse_double(s, "--sequence");
    if (v < 0 || v != std::floor(v)) { throw ValidationError("--sequence must be 'new' or a sequence index"); }
    return static_cast<int>(v);
}

// A CSV with a header; the column `t` is used when present, else the first column.
Vector load_times(const std::string &path) {
    std::ifstream in(path);
    if (!in) { throw ValidationError("cannot open '" + path + "'"); }
    std::string line;
    if (!std::getline(in, line)) { throw ValidationError(path + ": empty file"); }
    const auto header = split(line, ',');
    std::size_t col = 0;
    for (std::size_t j = 0; j < header.size(); ++j) {
        if (header[j] == "t") { col = j; }
    }
    std::vector<double> t;
    for (int lineno = 2; std::getline(in, line); ++lineno) {
        if (line.empty()) { continue; }
        const auto cells = split(line, ',');
        if (cells.size() <= col) { throw ValidationError(path + ": line " + std::to_string(lineno) + " is short"); }
        const double v = parse_double(cells[col], path + ": line " + std::to_string(lineno));
        if (!std::isfinite(v)) {
            throw ValidationError(path + ": line " + std::to_string(lineno) + ": non-finite time");
        }
        t.push_back(v);
    }
    if (t.empty()) { throw ValidationError(path + ": no time stamps"); }
    return Eigen::Map<Vector>(t.data(), static_cast<Eigen::Index>(t.size()));
}

void write_trace(const std::string &path, const std::vector<TraceRow> &trace) {
    auto out = open_out(path);
    out << "iteration,F_v,KL,grad_norm\n";
    for (const auto &r : trace) { out << r.iteration << ',' << r.bound << ',' << r.kl << ',' << r.grad_norm << '\n'; }
}

std::vector<TraceRow> read_trace(const std::string &path) {
    const auto d = load_dataset(path);
    std::vector<TraceRow> rows;
    const auto col = [&](const std::string &name) {
        for (std::size_t j = 0; j < d.names.size(); ++j) {
            if (d.names[j] == name) { return static_cast<Eigen::Index>(j); }
        }
        throw ValidationError(path + ": missing trace column '" + name + "'");
    };
    const auto it = col("iteration"), fv = col("F_v"), kl = col("KL"), gn = col("grad_norm");
    for (Eigen::Index i = 0; i < d.size(); ++i) {
        rows.push_back({static_cast<int>(d.y(i, it)), d.y(i, fv), d.y(i, kl), d.y(i, gn)});
    }
    return rows;
}

// Output table with the model's column layout.
TimeSeriesDataset table(const Vector &t, int seq, const Matrix &values, const std::vector<std::string> &names) {
    TimeSeriesDataset out;
    out.t = t;
    out.seq.assign(static_cast<std::size_t>(t.size()), seq);
    out.y = values;
    out.names = names;
    return out;
}

std::vector<std::string> select_names(const std::vector<std::string> &names, const std::vector<Eigen::Index> &cols) {
    std::vector<std::string> out;
    for (auto c : cols) { out.push_back(names[static_cast<std::size_t>(c)]); }
    return out;
}

Matrix select_cols(const Matrix &y, const std::vector<Eigen::Index> &cols) { return y(Eigen::all, cols); }

// Columns of `data` holding the named features, in the given order.
std::vector<Eigen::Index> locate(const TimeSeriesDataset &data, const std::vector<std::string> &wanted,
                                 const std::string &source) {
    std::vector<Eigen::Index> idx;
    for (const auto &w : wanted) {
        const auto it = std::find(data.names.begin(), data.names.end(), w);
        if (it == data.names.end()) { throw ValidationError(source + " has no column '" + w + "'"); }
        idx.push_back(it - data.names.begin());
    }
    return idx;
}

std::optional<std::string> optional_path(const std::string &s) {
    if (s.empty()) { return std::nullopt; }
    return s;
}

// --------------------------------------------------------------------------

struct TrainArgs {
    std::string data, out, trace, temporal = R"({"family":"rbf","variance":1.0,"lengthscale":10.0})";
    std::string freeze, method = "lbfgs";
    Eigen::Index latent_dims = 2, inducing = -1;
    int warmup = 0, iters = 1000, restarts = 1, memory = 20;
    double tol = 1e-6, lambda_init = 0.5, smoothing = 0.1;
    std::uint64_t seed = 0;
    bool no_center = false, verbose = false;
};

int run_train(const TrainArgs &a) {
    const auto data = load_dataset(a.data);
    ModelConfig mc;
    mc.latent_dims = a.latent_dims;
    mc.num_inducing = a.inducing;
    mc.temporal = parse_temporal_kernel(a.temporal);
    mc.lambda_init = a.lambda_init;
    mc.init_smoothing = a.smoothing;
    mc.center = !a.no_center;
    TrainConfig tc;
    tc.method = method_from_name(a.method);
    tc.warmup_iters = a.warmup;
    tc.schedule = {a.iters};
    tc.tol = a.tol;
    tc.lbfgs_memory = a.memory;
    tc.frozen = parse_groups(a.freeze);
    tc.verbose = a.verbose;
    tc.validate();
    if (a.restarts < 1) { throw ValidationError("--restarts must be >= 1"); }

    std::optional<TrainResult> best;
    for (int r = 0; r < a.restarts; ++r) {
        mc.seed = a.seed + static_cast<std::uint64_t>(r);
        auto res = train(make_model(data, mc), tc);
        const double f = res.trace.back().bound;
        std::cerr << "restart " << r << ": F_v = " << std::setprecision(10) << f << " after "
                  << res.trace.back().iteration << " iterations (" << status_name(res.status) << ")\n";
        if (res.status == TrainStatus::stalled) { std::cerr << "warning: " << res.message << "\n"; }
        if (!best || f > best->trace.back().bound) { best = std::move(res); }
    }
    auto &model = best->model;
    const fs::path data_abs = fs::absolute(a.data);
    const fs::path model_dir = fs::absolute(a.out).parent_path();
    model.dataset_path = data_abs.lexically_relative(model_dir).string();
    if (model.dataset_path.empty()) { model.dataset_path = data_abs.string(); }
    save_model(a.out, model);
    if (!a.trace.empty()) { write_trace(a.trace, best->trace); }
    std::cout << "F_v " << std::setprecision(12) << best->trace.back().bound << "\n";
    return 0;
}

// --------------------------------------------------------------------------

struct GenerateArgs {
    std::string model, data, times, out, sequence = "new";
};

int run_generate(const GenerateArgs &a) {
    const auto model = load_model(a.model, optional_path(a.data));
    const Vector t = load_times(a.times);
    const int seq = parse_sequence(a.sequence);
    const auto pm = forecast_outputs(model, t, seq);
    const auto outs = split(a.out, ',');
    if (outs.empty() || outs.size() > 2) { throw ValidationError("--out takes mean.csv or mean.csv,var.csv"); }
    const int id = sequence_id(model.prior, seq);
    save_dataset(outs[0], table(t, id, pm.mean, model.names));
    if (outs.size() == 2) { save_dataset(outs[1], table(t, id, pm.var, model.names)); }
    return 0;
}

// --------------------------------------------------------------------------

struct ReconstructArgs {
    std::string model, data, test, observed, out, var_out, trace, sequence = "new", method = "lbfgs";
    int iters = 200;
    double tol = 1e-6;
};

int run_reconstruct(const ReconstructArgs &a) {
    const auto model = load_model(a.model, optional_path(a.data));
    const auto test = load_dataset(a.test);
    const auto observed = parse_column_selection(a.observed, model.names);
    const auto missing = complement_columns(observed, model.output_dims());
    const auto obs_in_test = locate(test, select_names(model.names, observed), a.test);

    ReconstructConfig rc;
    rc.optimizer.method = method_from_name(a.method);
    rc.optimizer.schedule = {a.iters};
    rc.optimizer.tol = a.tol;
    rc.sequence = parse_sequence(a.sequence);
    const auto rec = reconstruct_missing(model, test.t, select_cols(test.y, obs_in_test), to_int(observed), rc);
    if (rec.status == TrainStatus::stalled) { std::cerr << "warning: test-time optimization stalled\n"; }

    Matrix full(test.size(), model.output_dims());
    Matrix var = Matrix::Zero(test.size(), model.output_dims());
    full(Eigen::all, observed) = select_cols(test.y, obs_in_test);
    full(Eigen::all, missing) = rec.moments.mean;
    var(Eigen::all, missing) = rec.moments.var;
    const int id = sequence_id(model.prior, rc.sequence);
    save_dataset(a.out, table(test.t, id, full, model.names));
    if (!a.var_out.empty()) { save_dataset(a.var_out, table(test.t, id, var, model.names)); }
    if (!a.trace.empty()) { write_trace(a.trace, rec.trace); }
    return 0;
}

// --------------------------------------------------------------------------

struct NnArgs {
    std::string train, test, observed, out;
    int k = 1;
};

int run_nn(const NnArgs &a) {
    const auto train_data = load_dataset(a.train);
    const auto test = load_dataset(a.test);
    const auto observed = parse_column_selection(a.observed, train_data.names);
    const auto missing = complement_columns(observed, train_data.dims());
    const auto obs_in_test = locate(test, select_names(train_data.names, observed), a.test);
    const Matrix test_obs = select_cols(test.y, obs_in_test);
    const Matrix fill =
        nn_baseline(select_cols(train_data.y, observed), select_cols(train_data.y, missing), test_obs, a.k);
    Matrix full(test.size(), train_data.dims());
    full(Eigen::all, observed) = test_obs;
    full(Eigen::all, missing) = fill;
    TimeSeriesDataset out = table(test.t, 0, full, train_data.names);
    out.seq = test.seq;
    save_dataset(a.out, out);
    return 0;
}

// --------------------------------------------------------------------------

struct EvaluateArgs {
    std::string recon, truth, cols, observed, angles, weights, baseline, out;
    int k = 0;
};

// Columns scored: --cols, else the complement of --observed-cols, else all.
std::vector<Eigen::Index> scored_columns(const std::string &cols, const std::string &observed,
                                         const std::vector<std::string> &names) {
    if (!cols.empty() && !observed.empty()) { throw ValidationError("give --cols or --observed-cols, not both"); }
    if (!cols.empty()) { return parse_column_selection(cols, names); }
    const auto d = static_cast<Eigen::Index>(names.size());
    if (!observed.empty()) { return complement_columns(parse_column_selection(observed, names), d); }
    std::vector<Eigen::Index> all(static_cast<std::size_t>(d));
    for (Eigen::Index j = 0; j < d; ++j) { all[static_cast<std::size_t>(j)] = j; }
    return all;
}

json report_json(const MetricReport &r, const std::vector<std::string> &names) {
    json cumulative = json::object();
    for (std::size_t j = 0; j < names.size(); ++j) { cumulative[names[j]] = r.cumulative[static_cast<Eigen::Index>(j)]; }
    return {{"entries", r.entries},       {"mse", r.mse},
            {"angle_rms", r.angle_rms},   {"angle_entries", r.angle_entries},
            {"cumulative", cumulative},   {"cumulative_total", r.cumulative_total},
            {"baseline", r.baseline},     {"k", r.k}};
}

int run_evaluate(const EvaluateArgs &a) {
    const auto recon = load_dataset(a.recon);
    const auto truth = load_dataset(a.truth);
    const auto cols = scored_columns(a.cols, a.observed, truth.names);
    const auto names = select_names(truth.names, cols);
    const auto in_recon = locate(recon, names, a.recon);
    MetricOptions opt;
    if (!a.angles.empty()) {
        opt.angle_columns.assign(cols.size(), false);
        for (auto c : parse_column_selection(a.angles, truth.names)) {
            const auto it = std::find(cols.begin(), cols.end(), c);
            if (it != cols.end()) { opt.angle_columns[static_cast<std::size_t>(it - cols.begin())] = true; }
        }
    }
    if (!a.weights.empty()) {
        const auto w = split(a.weights, ',');
        if (w.size() != cols.size()) {
            throw ValidationError("--weights needs one value per scored column (" + std::to_string(cols.size()) + ")");
        }
        opt.weights.resize(static_cast<Eigen::Index>(w.size()));
        for (std::size_t j = 0; j < w.size(); ++j) { opt.weights[static_cast<Eigen::Index>(j)] = parse_double(w[j], "--weights"); }
    }
    opt.baseline = a.baseline;
    opt.k = a.k;
    const auto rep = evaluate(select_cols(recon.y, in_recon), select_cols(truth.y, cols), opt);
    const std::string text = report_json(rep, names).dump(2);
    if (a.out.empty()) {
        std::cout << text << "\n";
    } else {
        open_out(a.out) << text << "\n";
    }
    return 0;
}

// --------------------------------------------------------------------------

struct SynthArgs {
    std::string out, latent_out, temporal = R"({"family":"rbf","variance":1.0,"lengthscale":10.0})";
    std::string beta = "100";
    std::uint64_t seed = 0;
    Eigen::Index n = 100, d = 12, q_true = 2, sequences = 1;
    double mapping_variance = 1.0, time_step = 1.0;
};

int run_synth(const SynthArgs &a) {
    SynthConfig cfg;
    cfg.seed = a.seed;
    cfg.n = a.n;
    cfg.d = a.d;
    cfg.sequences = a.sequences;
    cfg.temporal = parse_temporal_kernel(a.temporal);
    if (a.q_true < 1) { throw ValidationError("--q-true must be >= 1"); }
    cfg.mapping = ArdKernelParams(a.mapping_variance, Vector::Ones(a.q_true));
    cfg.beta = a.beta == "inf" ? std::numeric_limits<double>::infinity() : parse_double(a.beta, "--beta");
    cfg.time_step = a.time_step;
    const auto sample = synth_generate(cfg);
    save_dataset(a.out, sample.data);
    if (!a.latent_out.empty()) {
        std::vector<std::string> names;
        for (Eigen::Index q = 0; q < sample.latent.cols(); ++q) { names.push_back("x" + std::to_string(q + 1)); }
        TimeSeriesDataset lat = sample.data;
        lat.y = sample.latent;
        lat.names = names;
        save_dataset(a.latent_out, lat);
    }
    return 0;
}

// --------------------------------------------------------------------------

struct GradcheckArgs {
    std::string model, data, freeze;
    // trained models carry ~1e-9 absolute rounding noise in F_v; a step of 1e-6 amplifies it to ~1e-3
    double epsilon = 1e-4, tolerance = 1e-4;
    std::uint64_t seed = 0;
    Eigen::Index max_per_group = 50;
};

int run_gradcheck(const GradcheckArgs &a) {
    const auto model = load_model(a.model, optional_path(a.data));
    const auto rep = gradcheck(model, a.epsilon, a.seed, parse_groups(a.freeze), a.max_per_group);
    std::cout << "group,checked,max_rel_error,excluded\n" << std::setprecision(6);
    for (const auto &g : rep.groups) {
        std::cout << group_name(g.group) << ',' << g.checked << ',' << g.max_rel_error << ','
                  << (g.excluded ? "yes" : "no") << '\n';
    }
    if (rep.max_rel_error() > a.tolerance) {
        std::cerr << "gradcheck: max relative error " << rep.max_rel_error() << " exceeds " << a.tolerance << "\n";
        return kExitNumerical;
    }
    return 0;
}

// --------------------------------------------------------------------------

struct PlotArgs {
    std::string model, data, trace, recon, truth, cols, observed, out;
};

int run_export_plot(const PlotArgs &a) {
    if (a.model.empty() && a.trace.empty() && a.recon.empty()) {
        throw ValidationError("export-plot needs at least one of --model, --trace, --recon/--truth");
    }
    if (a.recon.empty() != a.truth.empty()) { throw ValidationError("--recon and --truth go together"); }
    auto out = open_out(a.out);
    out << "panel,series,group,x,value\n";
    if (!a.trace.empty()) {
        for (const auto &r : read_trace(a.trace)) {
            out << "trace,F_v,," << r.iteration << ',' << r.bound << '\n';
            out << "trace,KL,," << r.iteration << ',' << r.kl << '\n';
            out << "trace,grad_norm,," << r.iteration << ',' << r.grad_norm << '\n';
        }
    }
    if (!a.model.empty()) {
        const auto model = load_model(a.model, optional_path(a.data));
        const double wmax = model.ard.weights.maxCoeff();
        for (Eigen::Index q = 0; q < model.latent_dims(); ++q) {
            out << "ard,w,," << q + 1 << ',' << model.ard.weights[q] << '\n';
            out << "ard,w_relative,," << q + 1 << ',' << model.ard.weights[q] / wmax << '\n';
        }
        const auto posts = implied_posteriors(model.prior, model.state);
        for (Eigen::Index q = 0; q < model.latent_dims(); ++q) {
            const auto &p = posts[static_cast<std::size_t>(q)];
            for (Eigen::Index i = 0; i < model.num_points(); ++i) {
                const auto group = model.prior.seq_ids[static_cast<std::size_t>(i)];
                out << "latent,x" << q + 1 << "_mean," << group << ',' << model.prior.times[i] << ',' << p.mean[i] << '\n';
                out << "latent,x" << q + 1 << "_var," << group << ',' << model.prior.times[i] << ',' << p.cov(i, i)
                    << '\n';
            }
        }
    }
    if (!a.recon.empty()) {
        const auto recon = load_dataset(a.recon);
        const auto truth = load_dataset(a.truth);
        const auto cols = scored_columns(a.cols, a.observed, truth.names);
        const Matrix diff = select_cols(recon.y, locate(recon, select_names(truth.names, cols), a.recon)) -
                            select_cols(truth.y, cols);
        if (recon.size() != truth.size()) { throw ValidationError("--recon and --truth have different row counts"); }
        for (Eigen::Index i = 0; i < diff.rows(); ++i) {
            out << "error,mse," << truth.seq[static_cast<std::size_t>(i)] << ',' << truth.t[i] << ','
                << diff.row(i).squaredNorm() / static_cast<double>(diff.cols()) << '\n';
        }
    }
    return 0;
}

}  // namespace

int main(int argc, char **argv) {
    CLI::App app{"Variational GP dynamical systems"};
    app.require_subcommand(1);

    TrainArgs ta;
    auto *train_cmd = app.add_subcommand("train", "fit a model to a dataset");
    train_cmd->add_option("--data", ta.data, "training CSV")->required();
    train_cmd->add_option("--out", ta.out, "model checkpoint (JSON)")->required();
    train_cmd->add_option("--trace", ta.trace, "trace CSV: iteration,F_v,KL,grad_norm");
    train_cmd->add_option("-q,--latent-dims", ta.latent_dims, "latent dimensions Q")->capture_default_str();
    train_cmd->add_option("-m,--inducing", ta.inducing, "inducing points (default min(N, 50))");
    train_cmd->add_option("--temporal", ta.temporal, "temporal kernel JSON or @file")->capture_default_str();
    train_cmd->add_option("--warmup-iters", ta.warmup, "iterations with beta fixed")->capture_default_str();
    train_cmd->add_option("--iters", ta.iters, "main-phase iterations")->capture_default_str();
    train_cmd->add_option("--tol", ta.tol, "stop when |dF| < tol on 5 consecutive iterations")->capture_default_str();
    train_cmd->add_option("--seed", ta.seed, "initialization seed")->capture_default_str();
    train_cmd->add_option("--freeze", ta.freeze, "groups kept fixed: mu_bar,lambda,inducing,theta_f,theta_x,beta");
    train_cmd->add_option("--restarts", ta.restarts, "runs with seeds seed, seed+1, ...; best bound kept")
        ->capture_default_str();
    train_cmd->add_option("--method", ta.method, "lbfgs or scg")->capture_default_str();
    train_cmd->add_option("--lbfgs-memory", ta.memory, "L-BFGS correction pairs")->capture_default_str();
    train_cmd->add_option("--lambda-init", ta.lambda_init, "initial lambda")->capture_default_str();
    train_cmd->add_option("--init-smoothing", ta.smoothing, "s in mu_bar = (K_t + s I)^-1 mu")->capture_default_str();
    train_cmd->add_flag("--no-center", ta.no_center, "do not subtract column means");
    train_cmd->add_flag("-v,--verbose", ta.verbose, "per-iteration progress on stderr");

    GenerateArgs ga;
    auto *gen_cmd = app.add_subcommand("generate", "predict outputs at new time stamps");
    gen_cmd->add_option("--model", ga.model, "model checkpoint")->required();
    gen_cmd->add_option("--data", ga.data, "training data (default: path stored in the checkpoint)");
    gen_cmd->add_option("--times", ga.times, "CSV with a t column")->required();
    gen_cmd->add_option("--out", ga.out, "mean.csv or mean.csv,var.csv")->required();
    gen_cmd->add_option("--sequence", ga.sequence, "'new' or index of the training sequence continued")
        ->capture_default_str();

    ReconstructArgs ra;
    auto *rec_cmd = app.add_subcommand("reconstruct", "fill in unobserved columns of test rows");
    rec_cmd->add_option("--model", ra.model, "model checkpoint")->required();
    rec_cmd->add_option("--data", ra.data, "training data (default: path stored in the checkpoint)");
    rec_cmd->add_option("--test", ra.test, "test CSV holding at least the observed columns")->required();
    rec_cmd->add_option("--observed-cols", ra.observed, "observed columns, e.g. 1-3,7 or names")->required();
    rec_cmd->add_option("--out", ra.out, "reconstructed CSV")->required();
    rec_cmd->add_option("--var-out", ra.var_out, "predictive variances of the filled columns");
    rec_cmd->add_option("--trace", ra.trace, "trace CSV of the test-time optimization");
    rec_cmd->add_option("--sequence", ra.sequence, "'new' or index of the training sequence continued")
        ->capture_default_str();
    rec_cmd->add_option("--iters", ra.iters, "test-time iterations")->capture_default_str();
    rec_cmd->add_option("--tol", ra.tol, "stopping tolerance")->capture_default_str();
    rec_cmd->add_option("--method", ra.method, "lbfgs or scg")->capture_default_str();

    NnArgs na;
    auto *nn_cmd = app.add_subcommand("nn-baseline", "k-nearest-neighbour reconstruction");
    nn_cmd->add_option("--train", na.train, "training CSV")->required();
    nn_cmd->add_option("--test", na.test, "test CSV holding at least the observed columns")->required();
    nn_cmd->add_option("--observed-cols", na.observed, "observed columns")->required();
    nn_cmd->add_option("--k", na.k, "neighbours averaged")->capture_default_str();
    nn_cmd->add_option("--out", na.out, "reconstructed CSV")->required();

    EvaluateArgs ea;
    auto *eval_cmd = app.add_subcommand("evaluate", "error metrics of a reconstruction");
    eval_cmd->add_option("--recon", ea.recon, "reconstructed CSV")->required();
    eval_cmd->add_option("--truth", ea.truth, "ground-truth CSV")->required();
    eval_cmd->add_option("--cols", ea.cols, "columns scored (default: all)");
    eval_cmd->add_option("--observed-cols", ea.observed, "score the complement of these columns");
    eval_cmd->add_option("--angle-cols", ea.angles, "columns holding angles in degrees");
    eval_cmd->add_option("--weights", ea.weights, "comma separated per-column weights for the cumulative error");
    eval_cmd->add_option("--baseline", ea.baseline, "method label copied to the report");
    eval_cmd->add_option("--k", ea.k, "neighbour count copied to the report");
    eval_cmd->add_option("--out", ea.out, "report JSON (default: stdout)");

    SynthArgs sa;
    auto *synth_cmd = app.add_subcommand("synth", "sample a dataset from the generative model");
    synth_cmd->add_option("--out", sa.out, "dataset CSV")->required();
    synth_cmd->add_option("--latent-out", sa.latent_out, "true latents CSV");
    synth_cmd->add_option("--seed", sa.seed)->capture_default_str();
    synth_cmd->add_option("-n,--rows", sa.n, "rows, split evenly over sequences")->capture_default_str();
    synth_cmd->add_option("-d,--dims", sa.d, "output dimensions")->capture_default_str();
    synth_cmd->add_option("--q-true", sa.q_true, "latent dimensions")->capture_default_str();
    synth_cmd->add_option("--sequences", sa.sequences)->capture_default_str();
    synth_cmd->add_option("--temporal", sa.temporal, "temporal kernel JSON or @file")->capture_default_str();
    synth_cmd->add_option("--mapping-variance", sa.mapping_variance)->capture_default_str();
    synth_cmd->add_option("--beta", sa.beta, "noise precision, or inf")->capture_default_str();
    synth_cmd->add_option("--time-step", sa.time_step)->capture_default_str();

    GradcheckArgs gca;
    auto *gc_cmd = app.add_subcommand("gradcheck", "compare analytic and finite-difference gradients");
    gc_cmd->add_option("--model", gca.model, "model checkpoint")->required();
    gc_cmd->add_option("--data", gca.data, "training data (default: path stored in the checkpoint)");
    gc_cmd->add_option("--epsilon", gca.epsilon)->capture_default_str();
    gc_cmd->add_option("--seed", gca.seed)->capture_default_str();
    gc_cmd->add_option("--freeze", gca.freeze, "groups excluded");
    gc_cmd->add_option("--max-per-group", gca.max_per_group)->capture_default_str();
    gc_cmd->add_option("--tolerance", gca.tolerance, "exit 3 above this relative error")->capture_default_str();

    PlotArgs pa;
    auto *plot_cmd = app.add_subcommand("export-plot", "tidy CSV of traces, ARD weights, latents and errors");
    plot_cmd->add_option("--model", pa.model, "model checkpoint (ARD weights, latent means)");
    plot_cmd->add_option("--data", pa.data, "training data (default: path stored in the checkpoint)");
    plot_cmd->add_option("--trace", pa.trace, "trace CSV from train or reconstruct");
    plot_cmd->add_option("--recon", pa.recon, "reconstruction for per-frame errors");
    plot_cmd->add_option("--truth", pa.truth, "ground truth for per-frame errors");
    plot_cmd->add_option("--cols", pa.cols, "columns scored (default: all)");
    plot_cmd->add_option("--observed-cols", pa.observed, "score the complement of these columns");
    plot_cmd->add_option("--out", pa.out, "tidy CSV")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError &e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitValidation;
    }

    try {
        if (const char *env = std::getenv("VGPDS_THREADS")) {
            char *end = nullptr;
            const long v = std::strtol(env, &end, 10);
            if (*env == '\0' || *end != '\0' || v < 1) {
                throw ValidationError("VGPDS_THREADS must be a positive integer");
            }
        }
        if (*train_cmd) { return run_train(ta); }
        if (*gen_cmd) { return run_generate(ga); }
        if (*rec_cmd) { return run_reconstruct(ra); }
        if (*nn_cmd) { return run_nn(na); }
        if (*eval_cmd) { return run_evaluate(ea); }
        if (*synth_cmd) { return run_synth(sa); }
        if (*gc_cmd) { return run_gradcheck(gca); }
        if (*plot_cmd) { return run_export_plot(pa); }
    } catch (const ValidationError &e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const NumericalError &e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return kExitNumerical;
    } catch (const std::exception &e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
