#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "rlrk/harness.hpp"
#include "rlrk/init.hpp"
#include "rlrk/io.hpp"
#include "test_support.hpp"

using namespace rlrk;

namespace {

std::filesystem::path temp_dir(const std::string& leaf) {
    auto dir = std::filesystem::temp_directory_path() / "rlrk_harness_test" / leaf;
    std::filesystem::create_directories(dir);
    return dir;
}

std::string slurp(const std::filesystem::path& path) {
    std::ifstream in(path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

ExperimentConfig tiny_matrix_config(const std::string& out) {
    return parse_config_text(
        "scenario = convergence_matrix\n"
        "d1 = 12\nd2 = 12\nrank = 2\nn = 120\n"
        "noise = gaussian:1.0\nsnr_db = 30\n"
        "loss = absolute\nmax_iter = 60\nreplications = 3\nseed = 5\n"
        "output_dir = " + out + "\n");
}

}  // namespace

TEST_CASE("config parsing: fields and validation") {
    ExperimentConfig config = parse_config_text(
        "# comment\n"
        "scenario = RateCheck\n"
        "d1 = 80\nd2= 80\nrank = 5\n"
        "n_sweep = 2000, 4000, 8000\n"
        "noise = gaussian:0.5\n"
        "loss = absolute, huber:0.4\n"
        "q = 0.91\nc1 = 0.4\nreps = 10\nseed = 99\noutput_dir = /tmp/x\n");
    CHECK(config.scenario == Scenario::RateCheck);
    CHECK(config.n_sweep == std::vector<Index>{2000, 4000, 8000});
    CHECK(config.losses.size() == 2);
    CHECK(config.schedule.c1 == doctest::Approx(0.4));
    CHECK(config.replications == 10);

    CHECK_THROWS_AS(parse_config_text("scenario = convergence_matrix\n"), std::invalid_argument);
    CHECK_THROWS_AS(parse_config_text("bogus_key = 1\nn = 10\n"), std::invalid_argument);
    CHECK_THROWS_AS(parse_config_text("scenario = rate_check\nn_sweep = 100,200\n"),
                    std::invalid_argument);
    CHECK_THROWS_AS(
        parse_config_text("scenario = convergence_matrix\nn = 10\nsnr_db = 40\nnoise = none\n"),
        std::invalid_argument);
    CHECK_THROWS_AS(
        parse_config_text("scenario = convergence_tensor\nn = 10\nnoise = gaussian:1\n"),
        std::invalid_argument);
    CHECK_THROWS_AS(parse_config_text("scenario = convergence_matrix\nn = 10\nq = 1.5\n"),
                    std::invalid_argument);
    // memory guard
    CHECK_THROWS_AS(parse_config_text("scenario = convergence_matrix\nd1 = 20000\nd2 = 20000\n"
                                      "rank = 1\nn = 5000\n"),
                    std::invalid_argument);
}

TEST_CASE("fit_rate_slope: exact law, constants, noisy oracle") {
    std::vector<std::pair<Index, double>> exact;
    for (Index n : {1000, 2000, 4000, 8000})
        exact.emplace_back(n, 3.0 / std::sqrt(static_cast<double>(n)));
    CHECK(fit_rate_slope(exact) == doctest::Approx(-0.5).epsilon(1e-12));

    std::vector<std::pair<Index, double>> flat = {{100, 2.0}, {200, 2.0}, {400, 2.0}};
    CHECK(fit_rate_slope(flat) == doctest::Approx(0.0));

    // 5% multiplicative noise around the n^{-1/2} law, against a closed-form
    // OLS computed by hand
    Rng rng(17);
    std::vector<std::pair<Index, double>> noisy;
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (Index n : {500, 1000, 2000, 4000, 8000, 16000}) {
        const double err =
            std::pow(static_cast<double>(n), -0.5) * (1.0 + 0.05 * (2.0 * rng.uniform() - 1.0));
        noisy.emplace_back(n, err);
        const double x = std::log(static_cast<double>(n)), y = std::log(err);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    const double count = 6.0;
    const double by_hand = (count * sxy - sx * sy) / (count * sxx - sx * sx);
    CHECK(fit_rate_slope(noisy) == doctest::Approx(by_hand).epsilon(1e-12));
    CHECK(std::abs(fit_rate_slope(noisy) + 0.5) < 0.05);

    CHECK_THROWS_AS(fit_rate_slope({{10, 1.0}, {20, 0.5}}), std::invalid_argument);
    CHECK_THROWS_AS(fit_rate_slope({{10, 1.0}, {20, 0.5}, {30, -0.1}}), std::invalid_argument);
}

TEST_CASE("run_experiment: convergence scenario writes traces and summary") {
    const auto out = temp_dir("conv");
    ExperimentConfig config = tiny_matrix_config(out.string());
    ExperimentReport report = run_experiment(config);

    REQUIRE(report.methods.size() == 2);  // rsgrad + single-phase baseline
    CHECK(report.methods[0].name == "rsgrad_absolute");
    CHECK(report.methods[1].name == "single_phase_absolute");
    CHECK(!report.rate_slope.has_value());
    for (const auto& method : report.methods) {
        CHECK(method.reps.size() == 3);
        for (const auto& rep : method.reps) {
            CHECK(!rep.failed);
            CHECK(rep.final_rel_error > 0.0);
            CHECK(std::filesystem::exists(out / rep.trace_file));
        }
    }
    CHECK(std::filesystem::exists(report.summary_file));
    const std::string summary = slurp(report.summary_file);
    CHECK(summary.find("\"schema_version\": 1") != std::string::npos);
    CHECK(summary.find("rsgrad_absolute") != std::string::npos);
}

TEST_CASE("run_experiment: identical reruns produce identical bytes") {
    const auto out1 = temp_dir("rep1");
    const auto out2 = temp_dir("rep2");
    ExperimentConfig config1 = tiny_matrix_config(out1.string());
    ExperimentConfig config2 = tiny_matrix_config(out2.string());
    ExperimentReport r1 = run_experiment(config1);
    ExperimentReport r2 = run_experiment(config2);

    CHECK(slurp(r1.summary_file) == slurp(r2.summary_file));
    for (std::size_t mi = 0; mi < r1.methods.size(); ++mi)
        for (std::size_t k = 0; k < r1.methods[mi].reps.size(); ++k)
            CHECK(slurp(out1 / r1.methods[mi].reps[k].trace_file) ==
                  slurp(out2 / r2.methods[mi].reps[k].trace_file));
}

TEST_CASE("run_experiment: medians are permutation invariant") {
    const auto out = temp_dir("perm");
    ExperimentConfig config = tiny_matrix_config(out.string());
    config.replications = 5;
    ExperimentReport report = run_experiment(config);

    std::vector<double> errs;
    for (const auto& rep : report.methods[0].reps) errs.push_back(rep.final_rel_error);
    std::mt19937 shuffler(3);
    for (int round = 0; round < 5; ++round) {
        std::shuffle(errs.begin(), errs.end(), shuffler);
        std::vector<double> copy = errs;
        std::sort(copy.begin(), copy.end());
        CHECK(copy[2] == doctest::Approx(report.methods[0].median));
    }
}

TEST_CASE("run_experiment: rate check emits points and slope") {
    const auto out = temp_dir("rate");
    ExperimentConfig config = parse_config_text(
        "scenario = rate_check\n"
        "d1 = 12\nd2 = 12\nrank = 2\n"
        "n_sweep = 120, 240, 480\n"
        "noise = gaussian:1.0\nsnr_db = 30\n"
        "loss = absolute\nmax_iter = 80\nreplications = 3\nseed = 6\n"
        "c1 = 0.4\n"
        "output_dir = " + out.string() + "\n");
    ExperimentReport report = run_experiment(config);
    REQUIRE(report.rate_slope.has_value());
    REQUIRE(report.rate_points.size() == 3);
    CHECK(report.rate_points[0].first == 120);
    // errors should decrease with n
    CHECK(report.rate_points[2].second < report.rate_points[0].second);
    CHECK(*report.rate_slope < 0.0);
}

TEST_CASE("run_experiment: init compare reports both methods") {
    const auto out = temp_dir("init");
    ExperimentConfig config = parse_config_text(
        "scenario = init_compare\n"
        "dims = 10,10,10\nranks = 2,2,2\n"
        "n = 150\nnoise = student_t:2.1:1.0\nsnr_db = 14\n"
        "replications = 3\nseed = 7\n"
        "output_dir = " + out.string() + "\n");
    ExperimentReport report = run_experiment(config);
    REQUIRE(report.methods.size() == 2);
    CHECK(report.methods[0].name == "shrinkage_init");
    CHECK(report.methods[1].name == "hosvd_init");
    for (const auto& method : report.methods)
        for (const auto& rep : method.reps) CHECK(rep.final_rel_error > 0.0);
}

TEST_CASE("single_phase_baseline: identical to dual phase before the switch") {
    auto truth = gen_low_rank_matrix(16, 16, 2, {1.0, 1.0}, 31);
    const NoiseSpec noise = noise_at_snr(NoiseSpec::gaussian(1.0), 30.0, truth.object.norm());
    auto data = gen_observations(truth, 160, noise, 32);
    const Eigen::MatrixXd init = spectral_init_matrix(data, 2);

    SolverConfig config;
    config.rank = 2;
    config.loss = LossSpec::absolute();
    config.max_iter = 120;
    auto dual = rsgrad_matrix(data, config, init, truth.object);
    auto single = single_phase_baseline(data, config, init, truth.object);

    REQUIRE(dual.trace.switch_iter > 0);
    for (int l = 0; l < dual.trace.switch_iter; ++l) {
        const auto& a = dual.trace.records[static_cast<std::size_t>(l)];
        const auto& b = single.trace.records[static_cast<std::size_t>(l)];
        CHECK(a.objective == b.objective);  // bitwise
        CHECK(a.eta == b.eta);
    }
    // and it never leaves phase one
    for (const auto& rec : single.trace.records) CHECK(rec.phase == Phase::One);
}
