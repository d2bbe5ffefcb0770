#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "rlrk/solver.hpp"

namespace rlrk {

enum class Scenario {
    ConvergenceMatrix,
    ConvergenceTensor,
    AccuracyMatrix,
    RateCheck,
    InitCompare,
};

Scenario parse_scenario(const std::string& text);
std::string format_scenario(Scenario scenario);

/// One simulation campaign; parsed from a key = value config file.
struct ExperimentConfig {
    Scenario scenario = Scenario::ConvergenceMatrix;

    // geometry
    Index d1 = 80, d2 = 80;         // matrix scenarios
    Dims dims;                      // tensor scenarios
    Index rank = 5;                 // matrix rank
    RankVec ranks;                  // Tucker ranks
    std::vector<double> spectrum;   // matrix truth spectrum; default all ones
    double mode_min_sv = 1.0;       // tensor truth scale

    // data
    std::vector<Index> n_sweep = {2000};  // single entry unless rate_check
    NoiseSpec noise = NoiseSpec::none();
    std::optional<double> snr_db;  // rescales the noise to this SNR

    // methods
    std::vector<LossSpec> losses = {LossSpec::absolute()};
    std::string init = "spectral";  // spectral | hosvd | shrinkage[:tau] | truth
    PracticalSchedule schedule;
    int max_iter = 300;
    double stop_tol = 0.0;
    bool single_phase_baseline_on = true;  // per-loss never-switching runs
    bool rgrad_baseline_on = false;        // square loss + constant stepsize
    double rgrad_eta = 0.25;               // RGrad baseline stepsize = rgrad_eta / n
    bool huber_delta_from_noise = false;   // delta = robust noise estimate after a warmup

    // campaign
    int replications = 10;
    std::uint64_t seed = 1;
    std::filesystem::path output_dir = "out";
    bool write_traces = true;
};

ExperimentConfig parse_config_text(const std::string& text);
ExperimentConfig load_config(const std::filesystem::path& path);

struct RepResult {
    int replication = 0;
    double final_rel_error = 0.0;
    double phase1_rel_error = 0.0;  // rel_error at the switch (= final when no switch)
    int switch_iter = -1;
    bool failed = false;
    std::string error;
    std::string trace_file;  // empty when traces are not written
};

struct MethodReport {
    std::string name;
    std::vector<RepResult> reps;
    double median = 0.0;
    double q1 = 0.0;
    double q3 = 0.0;
    int failed_count = 0;
};

struct ExperimentReport {
    Scenario scenario = Scenario::ConvergenceMatrix;
    std::vector<MethodReport> methods;
    std::optional<double> rate_slope;  // present iff scenario == RateCheck
    std::vector<std::pair<Index, double>> rate_points;  // (n, median error)
    std::filesystem::path summary_file;
    bool all_failed = false;
};

/// Runs the campaign: derives one seed per replication, executes the
/// scenario's methods (replications through the worker pool), writes trace
/// CSVs and a summary JSON under config.output_dir. A numeric failure in one
/// replication is recorded without aborting the batch.
ExperimentReport run_experiment(const ExperimentConfig& config);

/// OLS slope of log(error) against log(n).
double fit_rate_slope(const std::vector<std::pair<Index, double>>& points);

/// RsGrad with the phase-two switch disabled: pure geometric decay.
MatrixSolveResult single_phase_baseline(const MatrixDataset& data, const SolverConfig& config,
                                        const Eigen::MatrixXd& init,
                                        const std::optional<Eigen::MatrixXd>& truth);
TensorSolveResult single_phase_baseline(const TensorDataset& data, const SolverConfig& config,
                                        const TensorXd& init,
                                        const std::optional<TensorXd>& truth);

}  // namespace rlrk
