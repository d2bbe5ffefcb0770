#pragma once

#include <optional>
#include <variant>
#include <vector>

#include "rlrk/geometry.hpp"
#include "rlrk/losses.hpp"
#include "rlrk/model.hpp"

namespace rlrk {

enum class Phase { One, Two };

/// Experiment-style schedule: geometrically decaying stepsizes, then a
/// constant noise-scaled stepsize once the decay has bottomed out and the
/// objective has stabilized.
struct PracticalSchedule {
    double c1 = 1.0;   // eta0 = c1 * (norm proxy) / n
    double q = 0.91;   // phase-one decay
    double c2 = 1.0;   // phase-two eta = c2 * noise_scale / n
    double switch_threshold = 0.02;  // as a fraction of eta0
    int switch_patience = 3;
    bool switch_enabled = true;  // false = single-phase geometric baseline

    /// Use the mean absolute residual at M0 instead of the operator norm of
    /// M0 as the distance proxy behind eta0.
    bool eta0_from_residual = false;
    std::optional<double> eta0_override;
    /// Phase-two noise scale; defaults to the residual estimate taken at the
    /// switch iterate.
    std::optional<double> noise_scale_override;
};

/// Schedule driven by user-supplied regularity constants. Phase-one decay is
/// (1 - 0.04 (mu_c/L_c)^2)^l for matrices and (1 - (mu_c/L_c)^2 / (16(m+1)))^l
/// for order-m tensors; phase two uses the midpoint of the stepsize bracket.
/// The phase is decided by comparing the true error (when available) against
/// tau_comp; without a ground truth the schedule stays in phase one.
struct TheoreticalSchedule {
    double mu_comp = 0.0;
    double L_comp = 0.0;
    double mu_stat = 0.0;
    double L_stat = 0.0;
    double tau_comp = 0.0;
    double tau_stat = 0.0;
    double eta0 = 0.0;
};

using Schedule = std::variant<PracticalSchedule, TheoreticalSchedule>;

struct SolverConfig {
    Index rank = 1;    // matrix rank
    RankVec ranks;     // Tucker ranks (tensor runs)
    LossSpec loss = LossSpec::absolute();
    Schedule schedule = PracticalSchedule{};
    int max_iter = 300;
    double stop_tol = 0.0;  // 0 = always run max_iter
};

struct TraceRecord {
    int iter = 0;
    double eta = 0.0;
    Phase phase = Phase::One;
    double objective = 0.0;
    std::optional<double> rel_error;
};

struct SolveTrace {
    std::vector<TraceRecord> records;
    int switch_iter = -1;  // first phase-two iteration, -1 when never switched
};

struct MatrixSolveResult {
    Eigen::MatrixXd estimate;
    SolveTrace trace;
};

struct TensorSolveResult {
    TensorXd estimate;
    SolveTrace trace;
};

/// Mean absolute residual n^-1 sum_i |Y_i - <M, X_i>|; the practical proxy
/// for both |M0 - M*|_F and E|xi|.
template <class Carrier>
double estimate_noise_scale(const Dataset<Carrier>& data, const Carrier& m) {
    return residuals(data, m).cwiseAbs().sum() / static_cast<double>(data.n());
}

/// Scheduler state threaded through the iterations; exposed so the stepsize
/// rules are unit-testable in isolation.
struct ScheduleState {
    double eta0 = 0.0;
    Phase phase = Phase::One;
    int stable_count = 0;          // consecutive small relative objective changes
    double noise_scale = 0.0;      // fixed at the switch
    double phase2_eta = 0.0;
    std::optional<double> true_err;  // |M_l - M*|_F when truth is known
    bool wants_switch = false;       // practical rule satisfied this iteration
};

/// Stepsize and phase for iteration l. `order` is 2 for matrices or the
/// tensor order m (it selects the theoretical decay/bracket constants);
/// `n` is the sample size.
std::pair<double, Phase> schedule_step(const Schedule& schedule, int l, ScheduleState& state,
                                       int order, Index n);

/// Feeds an observed objective value into the stabilization counter.
void schedule_observe(const Schedule& schedule, ScheduleState& state, int l, double objective,
                      double prev_objective);

/// Riemannian sub-gradient descent on the rank-r matrix manifold:
/// project a vanilla subgradient onto the tangent space, step, retract by
/// truncated SVD. Runs max_iter iterations (or stop_tol); the trace carries
/// one record per iterate including the final one.
MatrixSolveResult rsgrad_matrix(const MatrixDataset& data, const SolverConfig& config,
                                const Eigen::MatrixXd& init,
                                const std::optional<Eigen::MatrixXd>& truth = std::nullopt);

/// Tensor variant on the fixed Tucker-rank manifold with HOSVD retraction.
TensorSolveResult rsgrad_tensor(const TensorDataset& data, const SolverConfig& config,
                                const TensorXd& init,
                                const std::optional<TensorXd>& truth = std::nullopt);

}  // namespace rlrk
