#pragma once

#include <array>
#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include "vgpds/model.hpp"

namespace vgpds {

enum class ParamGroup { mu_bar, lambda, inducing, theta_f, theta_x, beta };

inline constexpr std::array<ParamGroup, 6> kAllGroups{ParamGroup::mu_bar,  ParamGroup::lambda,
                                                      ParamGroup::inducing, ParamGroup::theta_f,
                                                      ParamGroup::theta_x, ParamGroup::beta};

std::string group_name(ParamGroup g);
ParamGroup group_from_name(const std::string &name);
// Comma separated group names, e.g. "beta,theta_x". Empty string gives an empty set.
std::set<ParamGroup> parse_groups(const std::string &list);

// lambda is optimized as log(lambda) and clamped from below here.
inline constexpr double kLambdaFloor = 1e-8;

/// Maps the free parameters of a model to one flat vector. mu_bar is stored
/// whitened, u = L^T mu_bar with L the Cholesky factor of K_t when the map is
/// built (a fixed linear change of variables, so the KL term reads u^T u / 2
/// while K_t is unchanged). Inducing inputs are used raw; lambda, the ARD
/// parameters, the free temporal kernel parameters and beta are stored as
/// logarithms.
class ParameterMap {
public:
    ParameterMap(const VgpdsModel &model, const std::set<ParamGroup> &frozen);

    Eigen::Index size() const { return size_; }
    Vector pack(const VgpdsModel &model) const;
    // Writes x into model; returns the number of lambda entries clamped at the floor.
    int unpack(const Vector &x, VgpdsModel &model) const;
    // dF/dx from the raw-space gradient at the model's current parameters.
    Vector transform_gradient(const VgpdsModel &model, const BoundGradient &grad) const;
    // Half-open range of x occupied by a group; empty when frozen.
    std::pair<Eigen::Index, Eigen::Index> range(ParamGroup g) const;
    bool frozen(ParamGroup g) const { return frozen_.count(g) > 0; }

private:
    std::set<ParamGroup> frozen_;
    std::vector<bool> theta_x_free_;
    Matrix whiten_;  // lower Cholesky factor L of K_t at construction
    std::array<std::pair<Eigen::Index, Eigen::Index>, 6> ranges_{};
    Eigen::Index size_ = 0;
};

enum class OptimizerMethod { lbfgs, scg };

std::string method_name(OptimizerMethod m);
OptimizerMethod method_from_name(const std::string &name);

struct TrainConfig {
    OptimizerMethod method = OptimizerMethod::lbfgs;
    // Iterations with beta frozen before the joint phase.
    int warmup_iters = 0;
    // Main phase: the optimizer is restarted (fresh search directions and
    // curvature memory) at the start of every entry.
    std::vector<int> schedule{1000};
    double tol = 1e-6;
    // Consecutive rejected steps tolerated before giving up with a warning (scg).
    int max_rejections = 50;
    // Correction pairs kept by L-BFGS.
    int lbfgs_memory = 20;
    std::set<ParamGroup> frozen;
    bool verbose = false;

    void validate() const;
};

struct TraceRow {
    int iteration = 0;
    double bound = 0.0;
    double kl = 0.0;
    double grad_norm = 0.0;
};

enum class TrainStatus { converged, iteration_limit, stalled };

struct TrainResult {
    VgpdsModel model;
    std::vector<TraceRow> trace;
    TrainStatus status = TrainStatus::iteration_limit;
    std::string message;
    double final_grad_norm = 0.0;
    double final_delta = 0.0;
    int lambda_clamps = 0;
    int rejected_steps = 0;
};

/// Maximizes F_v with L-BFGS (Wolfe line search) or scaled conjugate
/// gradients. Either way a step is only taken if it increases the bound, so
/// the trace is monotone. The run stops early once |dF| < tol on 5
/// consecutive accepted iterations. A line search that cannot make progress
/// ends the run with status `stalled`, keeping the best point.
TrainResult train(const VgpdsModel &model, const TrainConfig &config);

std::string status_name(TrainStatus s);

struct GroupCheck {
    ParamGroup group;
    bool excluded = false;
    Eigen::Index checked = 0;
    double max_rel_error = 0.0;
};

struct GradcheckReport {
    std::vector<GroupCheck> groups;
    double max_rel_error() const;
};

/// Central differences of the bound against the analytic gradient in the
/// optimizer's parameter space. At most `max_per_group` coordinates per group
/// are checked, chosen with `seed`.
GradcheckReport gradcheck(const VgpdsModel &model, double epsilon = 1e-6, std::uint64_t seed = 0,
                          const std::set<ParamGroup> &frozen = {}, Eigen::Index max_per_group = 50);

}  // namespace vgpds
