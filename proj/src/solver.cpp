#include "rlrk/solver.hpp"

#include <cassert>
#include <cmath>
#include <sstream>

#include "rlrk/errors.hpp"

namespace rlrk {
namespace {

constexpr double kStableRelChange = 1e-3;

double rel_change(double cur, double prev) {
    if (prev == 0.0) return cur == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
    return std::abs(cur - prev) / std::abs(prev);
}

/// Phase-one decay factor of the theoretical schedule; order selects the
/// matrix (0.04) or tensor (1/(16(m+1))) constant.
double theory_decay(const TheoreticalSchedule& ts, int order) {
    const double ratio2 = (ts.mu_comp / ts.L_comp) * (ts.mu_comp / ts.L_comp);
    if (order <= 2) return 1.0 - 0.04 * ratio2;
    return 1.0 - ratio2 / (16.0 * (order + 1));
}

double theory_phase2_eta(const TheoreticalSchedule& ts, int order) {
    const double base = ts.mu_stat / (ts.L_stat * ts.L_stat);
    if (order <= 2) return 0.5 * (0.125 + 0.75) * base;
    return 0.5 * (0.25 + 0.75) / (order + 1) * base;
}

/// Averaged relative objective change over a trailing window; subgradient
/// objectives are non-monotone, so single-step changes are too noisy to stop
/// on.
bool stop_tol_reached(const std::vector<TraceRecord>& records, double stop_tol) {
    const int window = 5;
    if (stop_tol <= 0.0 || static_cast<int>(records.size()) < window + 1) return false;
    double acc = 0.0;
    const std::size_t last = records.size() - 1;
    for (int k = 0; k < window; ++k)
        acc += rel_change(records[last - k].objective, records[last - k - 1].objective);
    return acc / window < stop_tol;
}

template <class Result, class Carrier, class StepFn>
Result run_rsgrad(const Dataset<Carrier>& data, const SolverConfig& config, const Carrier& init,
                  const std::optional<Carrier>& truth, int order, double norm_proxy,
                  StepFn step) {
    if (config.max_iter < 1) throw std::invalid_argument("rsgrad: max_iter must be >= 1");
    detail::check_shapes(data, init, "rsgrad");
    const Index n = data.n();

    ScheduleState state;
    if (const auto* ps = std::get_if<PracticalSchedule>(&config.schedule)) {
        if (ps->eta0_override) {
            state.eta0 = *ps->eta0_override;
        } else {
            const double proxy =
                ps->eta0_from_residual ? estimate_noise_scale(data, init) : norm_proxy;
            state.eta0 =
                ps->c1 * proxy / (static_cast<double>(n) * loss_lipschitz_scale(config.loss));
        }
    } else {
        state.eta0 = std::get<TheoreticalSchedule>(config.schedule).eta0;
    }

    Result result;
    result.estimate = init;
    const double truth_norm = truth ? fro_norm(*truth) : 0.0;

    double prev_objective = 0.0;
    for (int l = 0; l < config.max_iter; ++l) {
        const auto [f, g] = objective_and_subgradient(config.loss, data, result.estimate);
        if (!std::isfinite(f)) {
            std::ostringstream msg;
            msg << "rsgrad: non-finite objective at iteration " << l;
            throw NumericError(msg.str());
        }
        schedule_observe(config.schedule, state, l, f, prev_objective);
        prev_objective = f;
        if (truth) state.true_err = fro_norm(result.estimate - *truth);

        if (state.wants_switch) {
            // switch point: pin the phase-two noise scale from this iterate
            const auto& ps = std::get<PracticalSchedule>(config.schedule);
            state.noise_scale =
                ps.noise_scale_override.value_or(estimate_noise_scale(data, result.estimate));
            state.phase2_eta = ps.c2 * state.noise_scale /
                               (static_cast<double>(n) * loss_lipschitz_scale(config.loss));
        }
        const auto [eta, phase] = schedule_step(config.schedule, l, state, order, n);
        if (phase == Phase::Two && result.trace.switch_iter < 0) result.trace.switch_iter = l;

        TraceRecord rec;
        rec.iter = l;
        rec.eta = eta;
        rec.phase = phase;
        rec.objective = f;
        if (truth)
            rec.rel_error = truth_norm > 0.0 ? *state.true_err / truth_norm : *state.true_err;
        result.trace.records.push_back(rec);

        if (stop_tol_reached(result.trace.records, config.stop_tol)) break;
        step(result.estimate, g, eta, l);
    }

    // final record: state of the last iterate reached
    TraceRecord rec;
    rec.iter = static_cast<int>(result.trace.records.size());
    rec.eta = result.trace.records.back().eta;
    rec.phase = result.trace.records.back().phase;
    rec.objective = objective(config.loss, data, result.estimate);
    if (truth) {
        const double err = fro_norm(result.estimate - *truth);
        rec.rel_error = truth_norm > 0.0 ? err / truth_norm : err;
    }
    result.trace.records.push_back(rec);
    return result;
}

}  // namespace

void schedule_observe(const Schedule& schedule, ScheduleState& state, int l, double objective,
                      double prev_objective) {
    state.wants_switch = false;
    const auto* ps = std::get_if<PracticalSchedule>(&schedule);
    if (ps == nullptr) return;
    if (l > 0) {
        if (rel_change(objective, prev_objective) < kStableRelChange)
            ++state.stable_count;
        else
            state.stable_count = 0;
    }
    if (state.phase == Phase::One && ps->switch_enabled) {
        const double candidate = std::pow(ps->q, l) * state.eta0;
        if (candidate < ps->switch_threshold * state.eta0 &&
            state.stable_count >= ps->switch_patience)
            state.wants_switch = true;
    }
}

std::pair<double, Phase> schedule_step(const Schedule& schedule, int l, ScheduleState& state,
                                       int order, Index n) {
    (void)n;
    if (const auto* ps = std::get_if<PracticalSchedule>(&schedule)) {
        if (state.phase == Phase::One && state.wants_switch) {
            state.phase = Phase::Two;
            state.wants_switch = false;
        }
        if (state.phase == Phase::Two) return {state.phase2_eta, Phase::Two};
        return {std::pow(ps->q, l) * state.eta0, Phase::One};
    }
    const auto& ts = std::get<TheoreticalSchedule>(schedule);
    if (state.true_err && *state.true_err < ts.tau_comp) state.phase = Phase::Two;
    if (state.phase == Phase::Two) return {theory_phase2_eta(ts, order), Phase::Two};
    return {std::pow(theory_decay(ts, order), l) * state.eta0, Phase::One};
}

MatrixSolveResult rsgrad_matrix(const MatrixDataset& data, const SolverConfig& config,
                                const Eigen::MatrixXd& init,
                                const std::optional<Eigen::MatrixXd>& truth) {
    const Index r = config.rank;
    if (r < 1 || r > std::min(init.rows(), init.cols()))
        throw std::invalid_argument("rsgrad_matrix: rank out of range");

    SvdFactors<double> factors = thin_svd(init);
    MatrixTangentBasis basis = make_matrix_basis(factors, r);
    const double norm_proxy = factors.s[0];

    auto step = [&](Eigen::MatrixXd& m, const Eigen::MatrixXd& g, double eta, int /*l*/) {
        const Eigen::MatrixXd p = tangent_project_matrix(g, basis);
        if (eta == 0.0 || p.norm() == 0.0) return;  // exact fixed point
        MatrixRetraction ret = retract_matrix_in_tangent(m - eta * p, r, basis);
        m = std::move(ret.estimate);
#ifndef NDEBUG
        Index numerical_rank = 0;
        for (Index k = 0; k < ret.factors.s.size(); ++k)
            if (ret.factors.s[k] > 1e-8 * ret.factors.s[0]) ++numerical_rank;
        assert(numerical_rank <= r);
#endif
        basis = make_matrix_basis(ret.factors, r);
    };
    return run_rsgrad<MatrixSolveResult>(data, config, init, truth, 2, norm_proxy, step);
}

TensorSolveResult rsgrad_tensor(const TensorDataset& data, const SolverConfig& config,
                                const TensorXd& init,
                                const std::optional<TensorXd>& truth) {
    const RankVec& ranks = config.ranks;
    check_rank_feasible(init.dims(), ranks);
    const int m = init.order();

    TuckerDecompXd decomp = hosvd(init, ranks).second;
    double norm_proxy = 0.0;
    for (int j = 0; j < m; ++j)
        norm_proxy = std::max(norm_proxy, thin_svd(matricize(init, j)).s[0]);

    auto step = [&](TensorXd& cur, const TensorXd& g, double eta, int /*l*/) {
        const TuckerTangentBasis basis = make_tucker_basis(decomp);
        TuckerProjection proj = tangent_project_tucker_full(g, basis);
        if (eta == 0.0 || fro_norm(proj.tangent) == 0.0) return;
        TuckerRetraction ret =
            retract_tucker_in_tangent(cur - eta * proj.tangent, ranks, basis, proj.udots);
        cur = std::move(ret.estimate);
        decomp = std::move(ret.decomp);
    };
    return run_rsgrad<TensorSolveResult>(data, config, init, truth, m, norm_proxy, step);
}

}  // namespace rlrk
