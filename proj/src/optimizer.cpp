#include "vgpds/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>

#include <ceres/gradient_problem.h>
#include <ceres/gradient_problem_solver.h>

#include "vgpds/error.hpp"

namespace vgpds {

std::string group_name(ParamGroup g) {
    switch (g) {
    case ParamGroup::mu_bar: return "mu_bar";
    case ParamGroup::lambda: return "lambda";
    case ParamGroup::inducing: return "inducing";
    case ParamGroup::theta_f: return "theta_f";
    case ParamGroup::theta_x: return "theta_x";
    case ParamGroup::beta: return "beta";
    }
    return "?";
}

ParamGroup group_from_name(const std::string &name) {
    for (auto g : kAllGroups) {
        if (group_name(g) == name) { return g; }
    }
    throw ValidationError("unknown parameter group '" + name +
                          "' (expected mu_bar, lambda, inducing, theta_f, theta_x or beta)");
}

std::set<ParamGroup> parse_groups(const std::string &list) {
    std::set<ParamGroup> out;
    std::stringstream ss(list);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item.erase(0, item.find_first_not_of(" \t"));
        item.erase(item.find_last_not_of(" \t") + 1);
        if (!item.empty()) { out.insert(group_from_name(item)); }
    }
    return out;
}

std::string status_name(TrainStatus s) {
    switch (s) {
    case TrainStatus::converged: return "converged";
    case TrainStatus::iteration_limit: return "iteration_limit";
    case TrainStatus::stalled: return "stalled";
    }
    return "?";
}

std::string method_name(OptimizerMethod m) { return m == OptimizerMethod::scg ? "scg" : "lbfgs"; }

OptimizerMethod method_from_name(const std::string &name) {
    if (name == "lbfgs") { return OptimizerMethod::lbfgs; }
    if (name == "scg") { return OptimizerMethod::scg; }
    throw ValidationError("unknown optimizer '" + name + "' (expected lbfgs or scg)");
}

void TrainConfig::validate() const {
    if (warmup_iters < 0) { throw ValidationError("warmup iterations must be >= 0"); }
    for (int it : schedule) {
        if (it < 0) { throw ValidationError("iteration counts must be >= 0"); }
    }
    if (!(tol > 0.0)) { throw ValidationError("convergence tolerance must be positive"); }
    if (max_rejections < 1) { throw ValidationError("max rejections must be at least 1"); }
    if (lbfgs_memory < 1) { throw ValidationError("L-BFGS memory must be at least 1"); }
}

// ---------------------------------------------------------------------------

namespace {

std::size_t idx(ParamGroup g) { return static_cast<std::size_t>(g); }

}  // namespace

ParameterMap::ParameterMap(const VgpdsModel &model, const std::set<ParamGroup> &frozen)
    : frozen_(frozen), theta_x_free_(model.prior.spec.free_mask()), whiten_(model.prior.chol.llt.matrixL()) {
    const Eigen::Index nq = model.state.mu_bar.size();
    const Eigen::Index sizes[6] = {
        nq,
        nq,
        model.state.inducing.size(),
        model.ard.num_params(),
        static_cast<Eigen::Index>(std::count(theta_x_free_.begin(), theta_x_free_.end(), true)),
        1};
    Eigen::Index at = 0;
    for (auto g : kAllGroups) {
        const Eigen::Index len = frozen_.count(g) ? 0 : sizes[idx(g)];
        ranges_[idx(g)] = {at, at + len};
        at += len;
    }
    size_ = at;
}

std::pair<Eigen::Index, Eigen::Index> ParameterMap::range(ParamGroup g) const { return ranges_[idx(g)]; }

Vector ParameterMap::pack(const VgpdsModel &model) const {
    Vector x(size_);
    auto put = [&](ParamGroup g, const Vector &v) {
        const auto [a, b] = range(g);
        if (b > a) { x.segment(a, b - a) = v; }
    };
    if (!frozen(ParamGroup::mu_bar)) {
        const Matrix u = whiten_.transpose() * model.state.mu_bar;
        put(ParamGroup::mu_bar, u.reshaped());
    }
    put(ParamGroup::lambda, model.state.lambda.array().log().matrix().reshaped());
    put(ParamGroup::inducing, model.state.inducing.reshaped());
    put(ParamGroup::theta_f, model.ard.log_params());
    if (!frozen(ParamGroup::theta_x)) {
        const Vector lp = model.prior.spec.log_params();
        Vector free(range(ParamGroup::theta_x).second - range(ParamGroup::theta_x).first);
        Eigen::Index k = 0;
        for (Eigen::Index i = 0; i < lp.size(); ++i) {
            if (theta_x_free_[i]) { free[k++] = lp[i]; }
        }
        put(ParamGroup::theta_x, free);
    }
    put(ParamGroup::beta, Vector::Constant(1, std::log(model.beta)));
    return x;
}

int ParameterMap::unpack(const Vector &x, VgpdsModel &model) const {
    if (x.size() != size_) { throw ValidationError("parameter vector has the wrong length"); }
    auto seg = [&](ParamGroup g) {
        const auto [a, b] = range(g);
        return x.segment(a, b - a);
    };
    int clamps = 0;
    auto &st = model.state;
    if (!frozen(ParamGroup::mu_bar)) {
        const Matrix u = seg(ParamGroup::mu_bar).reshaped(st.mu_bar.rows(), st.mu_bar.cols());
        st.mu_bar = whiten_.transpose().triangularView<Eigen::Upper>().solve(u);
    }
    if (!frozen(ParamGroup::lambda)) {
        const Vector v = seg(ParamGroup::lambda);
        for (Eigen::Index i = 0; i < v.size(); ++i) {
            double l = std::exp(v[i]);
            if (!(l >= kLambdaFloor)) {
                l = kLambdaFloor;
                ++clamps;
            }
            st.lambda.reshaped()[i] = l;
        }
    }
    if (!frozen(ParamGroup::inducing)) { st.inducing.reshaped() = seg(ParamGroup::inducing); }
    if (!frozen(ParamGroup::theta_f)) { model.ard = ArdKernelParams::from_log_params(seg(ParamGroup::theta_f)); }
    if (!frozen(ParamGroup::theta_x) && range(ParamGroup::theta_x).second > range(ParamGroup::theta_x).first) {
        Vector lp = model.prior.spec.log_params();
        const Vector v = seg(ParamGroup::theta_x);
        Eigen::Index k = 0;
        for (Eigen::Index i = 0; i < lp.size(); ++i) {
            if (theta_x_free_[i]) { lp[i] = v[k++]; }
        }
        model.set_temporal_kernel(model.prior.spec.with_log_params(lp));
    }
    if (!frozen(ParamGroup::beta)) { model.beta = std::exp(seg(ParamGroup::beta)[0]); }
    return clamps;
}

Vector ParameterMap::transform_gradient(const VgpdsModel &model, const BoundGradient &grad) const {
    Vector g(size_);
    auto put = [&](ParamGroup gr, const Vector &v) {
        const auto [a, b] = range(gr);
        if (b > a) { g.segment(a, b - a) = v; }
    };
    if (!frozen(ParamGroup::mu_bar)) {
        const Matrix gu = whiten_.triangularView<Eigen::Lower>().solve(grad.mu_bar);
        put(ParamGroup::mu_bar, gu.reshaped());
    }
    if (!frozen(ParamGroup::lambda)) {
        Vector gl = grad.lambda.reshaped();
        const auto lam = model.state.lambda.reshaped();
        for (Eigen::Index i = 0; i < gl.size(); ++i) {
            gl[i] = lam[i] <= kLambdaFloor ? 0.0 : gl[i] * lam[i];
        }
        put(ParamGroup::lambda, gl);
    }
    put(ParamGroup::inducing, grad.inducing.reshaped());
    put(ParamGroup::theta_f, grad.theta_f.cwiseProduct(model.ard.params()));
    if (!frozen(ParamGroup::theta_x)) {
        const Vector p = model.prior.spec.params();
        Vector free(range(ParamGroup::theta_x).second - range(ParamGroup::theta_x).first);
        Eigen::Index k = 0;
        for (Eigen::Index i = 0; i < p.size(); ++i) {
            if (theta_x_free_[i]) { free[k++] = grad.theta_x[i] * p[i]; }
        }
        put(ParamGroup::theta_x, free);
    }
    put(ParamGroup::beta, Vector::Constant(1, grad.beta * model.beta));
    return g;
}

// ---------------------------------------------------------------------------

namespace {

struct Evaluation {
    bool ok = false;
    double bound = 0.0;
    double kl = 0.0;
    Vector grad;  // dF/dx
};

class Objective {
public:
    Objective(VgpdsModel &work, const ParameterMap &map) : work_(work), map_(map) {}

    Evaluation operator()(const Vector &x, bool with_grad) {
        Evaluation e;
        try {
            clamps_ += map_.unpack(x, work_);
            if (with_grad) {
                BoundGradient g;
                const auto rep = bound_gradients(work_, g);
                e.bound = rep.bound;
                e.kl = rep.kl;
                e.grad = map_.transform_gradient(work_, g);
                e.ok = std::isfinite(e.bound) && e.grad.allFinite();
            } else {
                const auto rep = evaluate_bound(work_);
                e.bound = rep.bound;
                e.kl = rep.kl;
                e.ok = std::isfinite(e.bound);
            }
        } catch (const NumericalError &) {
            e.ok = false;
        } catch (const ValidationError &) {
            e.ok = false;
        }
        return e;
    }

    int clamps() const { return clamps_; }

private:
    VgpdsModel &work_;
    const ParameterMap &map_;
    int clamps_ = 0;
};

struct PhaseOutcome {
    bool converged = false;
    bool stalled = false;
    double last_delta = 0.0;
    double grad_norm = 0.0;
    int rejected = 0;
    std::string message;
};

double sup_norm(const Vector &v) { return v.size() ? v.cwiseAbs().maxCoeff() : 0.0; }

// Scaled conjugate gradients (Moller 1993, in the form used by Netlab),
// written for minimization of -F.
PhaseOutcome run_scg(VgpdsModel &model, const ParameterMap &map, int iters, const TrainConfig &cfg,
                     std::vector<TraceRow> &trace, int &clamps) {
    PhaseOutcome out;
    VgpdsModel work = model;
    Objective objective(work, map);
    Vector x = map.pack(model);
    Evaluation cur = objective(x, true);
    if (!cur.ok) { throw NumericalError("bound or gradient is not finite at the starting point"); }
    out.grad_norm = sup_norm(cur.grad);
    if (iters == 0 || x.size() == 0) {
        for (int i = 0; i < iters; ++i) {
            trace.push_back({trace.back().iteration + 1, cur.bound, cur.kl, out.grad_norm});
        }
        clamps += objective.clamps();
        return out;
    }

    constexpr double kSigma0 = 1e-4;
    constexpr double kScaleMin = 1e-15;
    constexpr double kScaleMax = 1e100;
    double scale = 1.0;
    double fold = -cur.bound;
    Vector gradnew = -cur.grad;
    Vector gradold = gradnew;
    Vector d = -gradnew;
    bool success = true;
    Eigen::Index nsuccess = 0;
    double mu = 0.0, kappa = 0.0, theta = 0.0;
    int small_steps = 0;
    int rejections = 0;
    Vector best_x = x;

    for (int it = 0; it < iters; ++it) {
        if (success) {
            mu = d.dot(gradnew);
            if (mu >= 0.0) {
                d = -gradnew;
                mu = d.dot(gradnew);
            }
            kappa = d.dot(d);
            if (kappa < std::numeric_limits<double>::epsilon()) {
                out.converged = true;
                trace.push_back({trace.back().iteration + 1, -fold, cur.kl, out.grad_norm});
                break;
            }
            const double sigma = kSigma0 / std::sqrt(kappa);
            const Evaluation plus = objective(x + sigma * d, true);
            theta = plus.ok ? d.dot(-plus.grad - gradnew) / sigma : scale * kappa;
        }
        double delta = theta + scale * kappa;
        if (delta <= 0.0) {
            delta = scale * kappa;
            scale = scale - theta / kappa;
        }
        const double alpha = -mu / delta;
        const Vector xnew = x + alpha * d;
        const Evaluation trial = objective(xnew, false);
        const double fnew = trial.ok ? -trial.bound : std::numeric_limits<double>::infinity();
        const double ratio = 2.0 * (fnew - fold) / (alpha * mu);
        if (trial.ok && ratio >= 0.0 && fnew <= fold) {
            const Evaluation full = objective(xnew, true);
            if (full.ok) {
                success = true;
                ++nsuccess;
                rejections = 0;
                out.last_delta = fold - fnew;
                x = xnew;
                cur = full;
                fold = fnew;
                gradold = gradnew;
                gradnew = -full.grad;
                out.grad_norm = sup_norm(gradnew);
                small_steps = std::abs(out.last_delta) < cfg.tol ? small_steps + 1 : 0;
            } else {
                success = false;
            }
        } else {
            success = false;
        }
        if (!success) {
            ++rejections;
            ++out.rejected;
        }
        trace.push_back({trace.back().iteration + 1, -fold, cur.kl, out.grad_norm});
        if (cfg.verbose) {
            std::cerr << "iter " << trace.back().iteration << "  F " << -fold << "  |g| " << out.grad_norm
                      << (success ? "" : "  (rejected)") << "\n";
        }
        if (small_steps >= 5) {
            out.converged = true;
            break;
        }
        if (rejections >= cfg.max_rejections) {
            out.stalled = true;
            break;
        }
        if (success && gradnew.squaredNorm() == 0.0) {
            out.converged = true;
            break;
        }

        if (!(ratio >= 0.25)) { scale = std::min(4.0 * scale, kScaleMax); }
        if (ratio > 0.75) { scale = std::max(0.5 * scale, kScaleMin); }
        if (nsuccess == x.size()) {
            d = -gradnew;
            nsuccess = 0;
        } else if (success) {
            const double gamma = (gradold - gradnew).dot(gradnew) / mu;
            d = gamma * d - gradnew;
        }
    }
    map.unpack(x, model);
    clamps += objective.clamps();
    return out;
}


// -F and its gradient for ceres. Recent evaluations are remembered so that
// the per-iteration callback can report the KL term of the accepted point.
class NegatedBound final : public ceres::FirstOrderFunction {
public:
    NegatedBound(Objective &objective, Eigen::Index n) : objective_(objective), n_(n) {}

    int NumParameters() const override { return static_cast<int>(n_); }

    bool Evaluate(const double *parameters, double *cost, double *gradient) const override {
        const Vector x = Eigen::Map<const Vector>(parameters, n_);
        const Evaluation e = objective_(x, gradient != nullptr);
        if (!e.ok) { return false; }
        *cost = -e.bound;
        if (gradient) { Eigen::Map<Vector>(gradient, n_) = -e.grad; }
        if (recent_.size() == 8) { recent_.erase(recent_.begin()); }
        recent_.push_back({x, e.kl});
        return true;
    }

    double kl_at(const Vector &x) const {
        for (auto it = recent_.rbegin(); it != recent_.rend(); ++it) {
            if (it->first == x) { return it->second; }
        }
        return objective_(x, false).kl;
    }

private:
    Objective &objective_;
    Eigen::Index n_;
    mutable std::vector<std::pair<Vector, double>> recent_;
};

class TraceCallback final : public ceres::IterationCallback {
public:
    TraceCallback(const NegatedBound &fn, const Vector &x, const TrainConfig &cfg, std::vector<TraceRow> &trace,
                  PhaseOutcome &out)
        : fn_(fn), x_(x), cfg_(cfg), trace_(trace), out_(out) {}

    ceres::CallbackReturnType operator()(const ceres::IterationSummary &s) override {
        if (s.iteration == 0) { return ceres::SOLVER_CONTINUE; }
        out_.grad_norm = s.gradient_max_norm;
        out_.last_delta = s.cost_change;
        trace_.push_back({trace_.back().iteration + 1, -s.cost, fn_.kl_at(x_), s.gradient_max_norm});
        if (cfg_.verbose) {
            std::cerr << "iter " << trace_.back().iteration << "  F " << -s.cost << "  |g| " << s.gradient_max_norm
                      << "  step " << s.step_size << "\n";
        }
        small_steps_ = std::abs(s.cost_change) < cfg_.tol ? small_steps_ + 1 : 0;
        if (small_steps_ >= 5) {
            out_.converged = true;
            return ceres::SOLVER_TERMINATE_SUCCESSFULLY;
        }
        return ceres::SOLVER_CONTINUE;
    }

private:
    const NegatedBound &fn_;
    const Vector &x_;
    const TrainConfig &cfg_;
    std::vector<TraceRow> &trace_;
    PhaseOutcome &out_;
    int small_steps_ = 0;
};

PhaseOutcome run_lbfgs(VgpdsModel &model, const ParameterMap &map, int iters, const TrainConfig &cfg,
                       std::vector<TraceRow> &trace, int &clamps) {
    PhaseOutcome out;
    VgpdsModel work = model;
    Objective objective(work, map);
    Vector x = map.pack(model);
    const Evaluation start = objective(x, true);
    if (!start.ok) { throw NumericalError("bound or gradient is not finite at the starting point"); }
    out.grad_norm = sup_norm(start.grad);
    if (iters == 0 || x.size() == 0) {
        for (int i = 0; i < iters; ++i) {
            trace.push_back({trace.back().iteration + 1, start.bound, start.kl, out.grad_norm});
        }
        clamps += objective.clamps();
        return out;
    }

    auto *fn = new NegatedBound(objective, x.size());
    ceres::GradientProblem problem(fn);  // takes ownership
    TraceCallback callback(*fn, x, cfg, trace, out);

    ceres::GradientProblemSolver::Options opts;
    opts.line_search_direction_type = ceres::LBFGS;
    opts.line_search_type = ceres::WOLFE;
    opts.max_lbfgs_rank = cfg.lbfgs_memory;
    opts.max_num_iterations = iters;
    // Termination is decided by the callback.
    opts.function_tolerance = 0.0;
    opts.gradient_tolerance = 0.0;
    opts.parameter_tolerance = 0.0;
    opts.logging_type = ceres::SILENT;
    opts.update_state_every_iteration = true;
    opts.callbacks.push_back(&callback);

    ceres::GradientProblemSolver::Summary summary;
    ceres::Solve(opts, problem, x.data(), &summary);
    if (summary.termination_type == ceres::FAILURE) {
        out.stalled = true;
        out.message = summary.message;
    }
    map.unpack(x, model);
    clamps += objective.clamps();
    return out;
}

}  // namespace

TrainResult train(const VgpdsModel &model, const TrainConfig &config) {
    config.validate();
    model.validate();
    TrainResult res;
    res.model = model;
    const auto initial = evaluate_bound(model);
    {
        BoundGradient g;
        bound_gradients(model, g);
        const ParameterMap map(model, config.frozen);
        res.trace.push_back({0, initial.bound, initial.kl, sup_norm(map.transform_gradient(model, g))});
    }

    struct Phase {
        int iters;
        std::set<ParamGroup> frozen;
    };
    std::vector<Phase> phases;
    if (config.warmup_iters > 0) {
        auto f = config.frozen;
        f.insert(ParamGroup::beta);
        phases.push_back({config.warmup_iters, f});
    }
    for (int it : config.schedule) { phases.push_back({it, config.frozen}); }

    bool converged = false;
    for (const auto &ph : phases) {
        const ParameterMap map(res.model, ph.frozen);
        const auto out = config.method == OptimizerMethod::scg
                             ? run_scg(res.model, map, ph.iters, config, res.trace, res.lambda_clamps)
                             : run_lbfgs(res.model, map, ph.iters, config, res.trace, res.lambda_clamps);
        res.final_grad_norm = out.grad_norm;
        res.final_delta = out.last_delta;
        res.rejected_steps += out.rejected;
        converged = out.converged;
        if (out.stalled) {
            res.status = TrainStatus::stalled;
            res.message = out.message.empty()
                              ? "optimizer stalled after " + std::to_string(config.max_rejections) +
                                    " consecutive rejected steps; returning best bound found"
                              : "line search failed (" + out.message + "); returning best bound found";
            return res;
        }
    }
    res.status = converged ? TrainStatus::converged : TrainStatus::iteration_limit;
    return res;
}

// ---------------------------------------------------------------------------

double GradcheckReport::max_rel_error() const {
    double m = 0.0;
    for (const auto &g : groups) { m = std::max(m, g.max_rel_error); }
    return m;
}

GradcheckReport gradcheck(const VgpdsModel &model, double epsilon, std::uint64_t seed,
                          const std::set<ParamGroup> &frozen, Eigen::Index max_per_group) {
    if (!(epsilon > 0.0)) { throw ValidationError("gradcheck epsilon must be positive"); }
    const ParameterMap map(model, frozen);
    VgpdsModel work = model;
    const Vector x0 = map.pack(model);
    BoundGradient g;
    bound_gradients(model, g);
    const Vector analytic = map.transform_gradient(model, g);
    std::mt19937_64 rng(seed);

    GradcheckReport rep;
    for (auto group : kAllGroups) {
        GroupCheck gc{group};
        const auto [a, b] = map.range(group);
        if (map.frozen(group) || b == a) {
            gc.excluded = true;
            rep.groups.push_back(gc);
            continue;
        }
        std::vector<Eigen::Index> coords(static_cast<std::size_t>(b - a));
        std::iota(coords.begin(), coords.end(), a);
        if (static_cast<Eigen::Index>(coords.size()) > max_per_group) {
            std::shuffle(coords.begin(), coords.end(), rng);
            coords.resize(static_cast<std::size_t>(max_per_group));
            std::sort(coords.begin(), coords.end());
        }
        Vector an(static_cast<Eigen::Index>(coords.size()));
        Vector fd(an.size());
        for (std::size_t k = 0; k < coords.size(); ++k) {
            Vector hi = x0, lo = x0;
            hi[coords[k]] += epsilon;
            lo[coords[k]] -= epsilon;
            map.unpack(hi, work);
            const double fhi = evaluate_bound(work).bound;
            map.unpack(lo, work);
            const double flo = evaluate_bound(work).bound;
            fd[static_cast<Eigen::Index>(k)] = (fhi - flo) / (2.0 * epsilon);
            an[static_cast<Eigen::Index>(k)] = analytic[coords[k]];
        }
        gc.checked = an.size();
        gc.max_rel_error = (an - fd).cwiseAbs().maxCoeff() / (1.0 + an.cwiseAbs().maxCoeff());
        rep.groups.push_back(gc);
    }
    return rep;
}

}  // namespace vgpds
