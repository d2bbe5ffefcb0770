#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "rlrk/errors.hpp"
#include "rlrk/init.hpp"
#include "rlrk/parallel.hpp"
#include "rlrk/solver.hpp"
#include "test_support.hpp"

using namespace rlrk;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

SolverConfig matrix_config(Index r, const LossSpec& loss, int max_iter,
                           const Schedule& schedule) {
    SolverConfig config;
    config.rank = r;
    config.loss = loss;
    config.max_iter = max_iter;
    config.schedule = schedule;
    return config;
}

double ols_slope(const std::vector<double>& x, const std::vector<double>& y) {
    const double n = static_cast<double>(x.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sx += x[i];
        sy += y[i];
        sxx += x[i] * x[i];
        sxy += x[i] * y[i];
    }
    return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

}  // namespace

TEST_CASE("schedule_step: practical stepsize formulas") {
    // eta0 = c1 |M0| / n with |M0| = 80, n = 2000 -> 0.04
    PracticalSchedule ps;
    ScheduleState state;
    state.eta0 = 1.0 * 80.0 / 2000.0;
    CHECK(state.eta0 == doctest::Approx(0.04));
    auto [eta0, phase0] = schedule_step(ps, 0, state, 2, 2000);
    CHECK(eta0 == doctest::Approx(0.04));
    CHECK(phase0 == Phase::One);
    auto [eta10, phase10] = schedule_step(ps, 10, state, 2, 2000);
    CHECK(eta10 == doctest::Approx(std::pow(0.91, 10) * 0.04));
    CHECK(eta10 / state.eta0 == doctest::Approx(0.389).epsilon(2e-3));
}

TEST_CASE("schedule_step: theoretical decay matches the convergence recipe") {
    // mu_comp / L_comp = 1/24 (n/12 over 2n) -> per-step factor 1 - 0.04/576
    TheoreticalSchedule ts;
    ts.mu_comp = 2000.0 / 12.0;
    ts.L_comp = 2.0 * 2000.0;
    ts.mu_stat = 1.0;
    ts.L_stat = 1.0;
    ts.tau_comp = 0.5;
    ts.tau_stat = 0.01;
    ts.eta0 = 1.0;
    ScheduleState state;
    state.eta0 = ts.eta0;
    const double factor = 1.0 - 0.04 / 576.0;
    auto [eta1, p1] = schedule_step(Schedule{ts}, 1, state, 2, 2000);
    CHECK(eta1 == doctest::Approx(factor));
    auto [eta7, p7] = schedule_step(Schedule{ts}, 7, state, 2, 2000);
    CHECK(eta7 == doctest::Approx(std::pow(factor, 7)));
    CHECK(p7 == Phase::One);

    // crossing tau_comp flips to the constant phase-two bracket midpoint
    state.true_err = 0.4;
    auto [eta_two, p_two] = schedule_step(Schedule{ts}, 8, state, 2, 2000);
    CHECK(p_two == Phase::Two);
    CHECK(eta_two == doctest::Approx(0.4375 * ts.mu_stat / (ts.L_stat * ts.L_stat)));
}

TEST_CASE("rsgrad_matrix: zero stepsize keeps the iterate") {
    auto truth = gen_low_rank_matrix(8, 8, 2, {1.0, 0.8}, 41);
    auto data = gen_observations(truth, 60, NoiseSpec::gaussian(0.1), 42);
    MatrixXd init = spectral_init_matrix(data, 2);

    PracticalSchedule zero;
    zero.eta0_override = 0.0;
    zero.switch_enabled = false;
    auto result = rsgrad_matrix(data, matrix_config(2, LossSpec::absolute(), 10, zero), init,
                                truth.object);
    CHECK((result.estimate - init).cwiseAbs().maxCoeff() == 0.0);
    for (const auto& rec : result.trace.records)
        CHECK(rec.objective == doctest::Approx(result.trace.records[0].objective));
}

TEST_CASE("rsgrad_matrix: square loss at the truth is a fixed point") {
    auto truth = gen_low_rank_matrix(8, 8, 2, {1.0, 0.8}, 43);
    auto data = gen_observations(truth, 60, NoiseSpec::none(), 44);
    auto result = rsgrad_matrix(data, matrix_config(2, LossSpec::square(), 20, PracticalSchedule{}),
                                truth.object, truth.object);
    CHECK((result.estimate - truth.object).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("rsgrad_matrix: noiseless exact recovery with linear convergence") {
    const Index d = 20, r = 2, n = 200;
    auto truth = gen_low_rank_matrix(d, d, r, {1.0, 1.0}, 45);
    auto data = gen_observations(truth, n, NoiseSpec::none(), 46);
    MatrixXd init = spectral_init_matrix(data, r);

    PracticalSchedule ps;
    ps.switch_enabled = false;  // phase-one-only
    auto result = rsgrad_matrix(data, matrix_config(r, LossSpec::absolute(), 300, ps), init,
                                truth.object);
    CHECK(result.trace.records.back().rel_error.value() < 1e-6);

    // log rel_error slope over iterations 50..250 bounded away from zero
    std::vector<double> xs, ys;
    for (int l = 50; l <= 250; ++l) {
        const double err = result.trace.records[static_cast<std::size_t>(l)].rel_error.value();
        if (err <= 0.0) break;  // fp floor reached
        xs.push_back(static_cast<double>(l));
        ys.push_back(std::log(err));
    }
    CHECK(ols_slope(xs, ys) < -0.01);

    // phase-one stepsizes strictly decreasing (the trailing record is a
    // state snapshot of the final iterate, not a step)
    for (std::size_t l = 1; l + 1 < result.trace.records.size(); ++l)
        CHECK(result.trace.records[l].eta < result.trace.records[l - 1].eta);
}

TEST_CASE("rsgrad_matrix: dual-phase switches and holds a constant stepsize") {
    const Index d = 24, r = 2, n = 240;
    auto truth = gen_low_rank_matrix(d, d, r, {1.0, 1.0}, 47);
    const NoiseSpec noise = noise_at_snr(NoiseSpec::gaussian(1.0), 30.0, truth.object.norm());
    auto data = gen_observations(truth, n, noise, 48);
    MatrixXd init = spectral_init_matrix(data, r);

    auto result = rsgrad_matrix(data, matrix_config(r, LossSpec::absolute(), 150, PracticalSchedule{}),
                                init, truth.object);
    const int sw = result.trace.switch_iter;
    REQUIRE(sw > 0);
    for (int l = 1; l < sw; ++l)
        CHECK(result.trace.records[static_cast<std::size_t>(l)].eta <
              result.trace.records[static_cast<std::size_t>(l - 1)].eta);
    for (std::size_t l = static_cast<std::size_t>(sw) + 1; l < result.trace.records.size(); ++l) {
        CHECK(result.trace.records[l].phase == Phase::Two);
        CHECK(result.trace.records[l].eta == result.trace.records[static_cast<std::size_t>(sw)].eta);
    }
}

TEST_CASE("rsgrad_matrix: bitwise deterministic across thread counts") {
    auto truth = gen_low_rank_matrix(10, 10, 2, {1.0, 0.7}, 49);
    auto data = gen_observations(truth, 80, NoiseSpec::gaussian(0.05), 50);
    MatrixXd init = spectral_init_matrix(data, 2);
    const SolverConfig config = matrix_config(2, LossSpec::absolute(), 40, PracticalSchedule{});

    const int saved = thread_count();
    set_thread_count(1);
    auto run1 = rsgrad_matrix(data, config, init, truth.object);
    set_thread_count(3);
    auto run3 = rsgrad_matrix(data, config, init, truth.object);
    set_thread_count(saved);

    CHECK((run1.estimate - run3.estimate).cwiseAbs().maxCoeff() == 0.0);
    REQUIRE(run1.trace.records.size() == run3.trace.records.size());
    for (std::size_t l = 0; l < run1.trace.records.size(); ++l) {
        CHECK(run1.trace.records[l].objective == run3.trace.records[l].objective);
        CHECK(run1.trace.records[l].eta == run3.trace.records[l].eta);
    }
}

TEST_CASE("rsgrad_matrix: non-finite data raises NumericError with iteration index") {
    auto truth = gen_low_rank_matrix(6, 6, 2, {1.0, 0.8}, 51);
    auto data = gen_observations(truth, 40, NoiseSpec::gaussian(0.1), 52);
    data.responses[3] = std::numeric_limits<double>::infinity();
    MatrixXd init = truth.object;
    try {
        rsgrad_matrix(data, matrix_config(2, LossSpec::square(), 10, PracticalSchedule{}), init,
                      std::nullopt);
        FAIL("expected NumericError");
    } catch (const NumericError& err) {
        CHECK(std::string(err.what()).find("iteration") != std::string::npos);
    }
}

TEST_CASE("rsgrad_tensor: fixed point at the truth") {
    auto truth = gen_low_rank_tensor({6, 5, 4}, {2, 2, 2}, 1.0, 53);
    auto data = gen_observations(truth, 50, NoiseSpec::none(), 54);
    SolverConfig config;
    config.ranks = {2, 2, 2};
    config.loss = LossSpec::huber(0.5);
    config.max_iter = 15;
    auto result = rsgrad_tensor(data, config, truth.object, truth.object);
    CHECK(fro_norm(result.estimate - truth.object) < 1e-10);
}

TEST_CASE("rsgrad_tensor: m=2 trace matches the matrix solver") {
    const Index d1 = 12, d2 = 10, r = 2, n = 150;
    auto truth_m = gen_low_rank_matrix(d1, d2, r, {1.0, 0.8}, 55);
    const NoiseSpec noise = NoiseSpec::gaussian(0.02);
    auto data_m = gen_observations(truth_m, n, noise, 56);

    // mirror the dataset into order-2 tensors (same bytes, same layout)
    GroundTruth<TensorXd> truth_t;
    truth_t.object = TensorXd({d1, d2}, Eigen::Map<const VectorXd>(truth_m.object.data(),
                                                                   truth_m.object.size()));
    truth_t.sigma_min = truth_m.sigma_min;
    truth_t.kappa = truth_m.kappa;
    TensorDataset data_t;
    data_t.seed = data_m.seed;
    data_t.noise = noise;
    data_t.truth = truth_t;
    data_t.responses = data_m.responses;
    for (const auto& x : data_m.sensing)
        data_t.sensing.emplace_back(Dims{d1, d2},
                                    Eigen::Map<const VectorXd>(x.data(), x.size()));

    MatrixXd init_m = spectral_init_matrix(data_m, r);
    TensorXd init_t({d1, d2}, Eigen::Map<const VectorXd>(init_m.data(), init_m.size()));

    SolverConfig cfg_m = matrix_config(r, LossSpec::absolute(), 60, PracticalSchedule{});
    SolverConfig cfg_t = cfg_m;
    cfg_t.ranks = {r, r};

    auto run_m = rsgrad_matrix(data_m, cfg_m, init_m, truth_m.object);
    auto run_t = rsgrad_tensor(data_t, cfg_t, init_t, truth_t.object);

    REQUIRE(run_m.trace.records.size() == run_t.trace.records.size());
    for (std::size_t l = 0; l < run_m.trace.records.size(); ++l) {
        const auto& a = run_m.trace.records[l];
        const auto& b = run_t.trace.records[l];
        CHECK(a.objective == doctest::Approx(b.objective).epsilon(1e-8));
        CHECK(a.eta == doctest::Approx(b.eta).epsilon(1e-8));
        CHECK(a.rel_error.value() == doctest::Approx(b.rel_error.value()).epsilon(1e-6));
    }
    CHECK(fro_norm(run_t.estimate -
                   TensorXd({d1, d2}, Eigen::Map<const VectorXd>(run_m.estimate.data(),
                                                                 run_m.estimate.size()))) <
          1e-7 * run_m.estimate.norm());
}

TEST_CASE("estimate_noise_scale: pinned cases") {
    auto truth = gen_low_rank_matrix(8, 8, 2, {1.0, 0.9}, 57);
    auto clean = gen_observations(truth, 30, NoiseSpec::none(), 58);
    CHECK(estimate_noise_scale(clean, truth.object) == doctest::Approx(0.0));

    const double sigma = 0.6;
    auto noisy = gen_observations(truth, 20000, NoiseSpec::gaussian(sigma), 59);
    CHECK(estimate_noise_scale(noisy, truth.object) ==
          doctest::Approx(sigma * std::sqrt(2.0 / M_PI)).epsilon(0.02));
}

TEST_CASE("rsgrad config validation") {
    auto truth = gen_low_rank_matrix(6, 6, 2, {1.0, 0.9}, 60);
    auto data = gen_observations(truth, 20, NoiseSpec::none(), 61);
    SolverConfig config = matrix_config(0, LossSpec::absolute(), 10, PracticalSchedule{});
    CHECK_THROWS_AS(rsgrad_matrix(data, config, truth.object, std::nullopt),
                    std::invalid_argument);
    config.rank = 2;
    config.max_iter = 0;
    CHECK_THROWS_AS(rsgrad_matrix(data, config, truth.object, std::nullopt),
                    std::invalid_argument);
}
