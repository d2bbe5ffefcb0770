#include "rlrk/harness.hpp"

#include <json.hpp>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <semaphore>
#include <sstream>

#include "rlrk/errors.hpp"
#include "rlrk/init.hpp"
#include "rlrk/io.hpp"
#include "rlrk/parallel.hpp"
#include "rlrk/rng.hpp"

namespace rlrk {
namespace {

using Eigen::MatrixXd;

std::string normalize_key(std::string s) {
    std::string out;
    for (char c : s)
        if (c != '_' && c != '-') out.push_back(static_cast<char>(std::tolower(c)));
    return out;
}

std::string trim(const std::string& s) {
    const auto begin = s.find_first_not_of(" \t\r");
    if (begin == std::string::npos) return "";
    const auto end = s.find_last_not_of(" \t\r");
    return s.substr(begin, end - begin + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::stringstream stream(s);
    std::string item;
    while (std::getline(stream, item, sep)) out.push_back(trim(item));
    return out;
}

bool parse_bool(const std::string& v) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw std::invalid_argument("config: expected a boolean, got '" + v + "'");
}

double quantile_sorted(const std::vector<double>& sorted, double p) {
    if (sorted.empty()) return 0.0;
    const double pos = p * static_cast<double>(sorted.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(pos);
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return (1.0 - frac) * sorted[lo] + frac * sorted[hi];
}

void finalize_method(MethodReport& method) {
    std::vector<double> ok;
    for (const auto& rep : method.reps) {
        if (rep.failed)
            ++method.failed_count;
        else
            ok.push_back(rep.final_rel_error);
    }
    std::sort(ok.begin(), ok.end());
    method.median = quantile_sorted(ok, 0.5);
    method.q1 = quantile_sorted(ok, 0.25);
    method.q3 = quantile_sorted(ok, 0.75);
}

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t salt) {
    Rng rng = Rng::stream(master, salt);
    return rng.next_u64();
}

struct MethodSpec {
    std::string name;
    LossSpec loss;
    bool single_phase = false;
    bool rgrad_constant = false;  // square-loss RGrad with constant stepsize
    bool huber_from_noise = false;
};

std::vector<MethodSpec> solver_methods(const ExperimentConfig& config) {
    std::vector<MethodSpec> methods;
    for (const auto& loss : config.losses) {
        MethodSpec ms;
        ms.loss = loss;
        ms.name = "rsgrad_" + format_loss(loss);
        ms.huber_from_noise =
            config.huber_delta_from_noise && loss.kind == LossSpec::Kind::Huber;
        if (ms.huber_from_noise) ms.name = "rsgrad_huber:auto";
        methods.push_back(ms);
    }
    if (config.single_phase_baseline_on) {
        for (const auto& loss : config.losses) {
            MethodSpec ms;
            ms.loss = loss;
            ms.single_phase = true;
            ms.name = "single_phase_" + format_loss(loss);
            methods.push_back(ms);
        }
    }
    if (config.rgrad_baseline_on) {
        MethodSpec ms;
        ms.loss = LossSpec::square();
        ms.rgrad_constant = true;
        ms.name = "rgrad_square";
        methods.push_back(ms);
    }
    return methods;
}

SolverConfig base_solver_config(const ExperimentConfig& config) {
    SolverConfig solver;
    solver.rank = config.rank;
    solver.ranks = config.ranks;
    solver.schedule = config.schedule;
    solver.max_iter = config.max_iter;
    solver.stop_tol = config.stop_tol;
    return solver;
}

SolverConfig method_solver_config(const ExperimentConfig& config, const MethodSpec& method,
                                  Index n) {
    SolverConfig solver = base_solver_config(config);
    solver.loss = method.loss;
    PracticalSchedule schedule = config.schedule;
    if (method.single_phase) schedule.switch_enabled = false;
    if (method.rgrad_constant) {
        schedule.switch_enabled = false;
        schedule.q = 1.0;
        schedule.eta0_override = config.rgrad_eta / static_cast<double>(n);
    }
    solver.schedule = schedule;
    return solver;
}

template <class Result>
void record_solve(RepResult& slot, const Result& result) {
    const auto& records = result.trace.records;
    slot.final_rel_error = records.back().rel_error.value();
    slot.switch_iter = result.trace.switch_iter;
    const std::size_t plateau_at = slot.switch_iter >= 0
                                       ? static_cast<std::size_t>(slot.switch_iter)
                                       : records.size() - 1;
    slot.phase1_rel_error = records[plateau_at].rel_error.value();
}

NoiseSpec resolve_noise(const ExperimentConfig& config, double truth_fro) {
    if (!config.snr_db) return config.noise;
    return noise_at_snr(config.noise, *config.snr_db, truth_fro);
}

/// Runs every method of one replication of a matrix scenario.
void run_matrix_job(const ExperimentConfig& config, const std::vector<MethodSpec>& methods,
                    Index n, std::uint64_t job_seed, int rep,
                    std::vector<std::vector<RepResult>>& results,
                    std::vector<std::vector<SolveTrace>>& traces, std::size_t job_index) {
    const std::vector<double> spectrum =
        config.spectrum.empty() ? std::vector<double>(static_cast<std::size_t>(config.rank), 1.0)
                                : config.spectrum;
    const auto truth = gen_low_rank_matrix(config.d1, config.d2, config.rank, spectrum,
                                           derive_seed(job_seed, 0));
    const NoiseSpec noise = resolve_noise(config, truth.object.norm());
    const MatrixDataset data = gen_observations(truth, n, noise, derive_seed(job_seed, 1));

    MatrixXd init;
    if (config.init == "spectral")
        init = spectral_init_matrix(data, config.rank);
    else if (config.init == "truth")
        init = truth.object;
    else
        throw std::invalid_argument("config: matrix init must be spectral or truth");

    std::optional<double> huber_auto_delta;
    for (std::size_t mi = 0; mi < methods.size(); ++mi) {
        RepResult& slot = results[mi][job_index];
        slot.replication = rep;
        try {
            SolverConfig solver = method_solver_config(config, methods[mi], n);
            if (methods[mi].huber_from_noise) {
                if (!huber_auto_delta) {
                    // short phase-one absolute warmup, then a robust read of
                    // the noise scale off its residuals (median absolute
                    // deviation; the plain mean is inflated by the remaining
                    // iterate error and by heavy-tailed outliers)
                    SolverConfig pilot = solver;
                    pilot.loss = LossSpec::absolute();
                    PracticalSchedule ps = config.schedule;
                    ps.switch_enabled = false;
                    pilot.schedule = ps;
                    pilot.max_iter = std::min(config.max_iter, 60);
                    const auto warm = rsgrad_matrix(data, pilot, init, truth.object);
                    Eigen::VectorXd res = residuals(data, warm.estimate).cwiseAbs();
                    std::vector<double> sorted(res.data(), res.data() + res.size());
                    std::nth_element(sorted.begin(), sorted.begin() + sorted.size() / 2,
                                     sorted.end());
                    huber_auto_delta = 1.4826 * sorted[sorted.size() / 2];
                }
                solver.loss = LossSpec::huber(*huber_auto_delta);
            }
            const auto result = rsgrad_matrix(data, solver, init, truth.object);
            record_solve(slot, result);
            traces[mi][job_index] = result.trace;
        } catch (const NumericError& err) {
            slot.failed = true;
            slot.error = err.what();
        }
    }
}

void run_tensor_job(const ExperimentConfig& config, const std::vector<MethodSpec>& methods,
                    Index n, std::uint64_t job_seed, int rep,
                    std::vector<std::vector<RepResult>>& results,
                    std::vector<std::vector<SolveTrace>>& traces, std::size_t job_index) {
    const auto truth = gen_low_rank_tensor(config.dims, config.ranks, config.mode_min_sv,
                                           derive_seed(job_seed, 0));
    const NoiseSpec noise = resolve_noise(config, fro_norm(truth.object));
    const TensorDataset data = gen_observations(truth, n, noise, derive_seed(job_seed, 1));

    TensorXd init;
    if (config.init == "hosvd")
        init = hosvd_init_tensor(data, config.ranks);
    else if (config.init == "truth")
        init = truth.object;
    else if (config.init == "shrinkage")
        init = shrinkage_init_tensor(data, config.ranks, ShrinkageParams::plug_in());
    else if (config.init.rfind("shrinkage:", 0) == 0)
        init = shrinkage_init_tensor(
            data, config.ranks,
            ShrinkageParams::explicit_tau(std::stod(config.init.substr(10))));
    else
        throw std::invalid_argument("config: tensor init must be hosvd, shrinkage[:tau] or truth");

    for (std::size_t mi = 0; mi < methods.size(); ++mi) {
        RepResult& slot = results[mi][job_index];
        slot.replication = rep;
        try {
            const SolverConfig solver = method_solver_config(config, methods[mi], n);
            const auto result = rsgrad_tensor(data, solver, init, truth.object);
            record_solve(slot, result);
            traces[mi][job_index] = result.trace;
        } catch (const NumericError& err) {
            slot.failed = true;
            slot.error = err.what();
        }
    }
}

void run_init_compare_job(const ExperimentConfig& config, Index n, std::uint64_t job_seed,
                          int rep, std::vector<std::vector<RepResult>>& results,
                          std::size_t job_index) {
    const auto truth = gen_low_rank_tensor(config.dims, config.ranks, config.mode_min_sv,
                                           derive_seed(job_seed, 0));
    const NoiseSpec noise = resolve_noise(config, fro_norm(truth.object));
    const TensorDataset data = gen_observations(truth, n, noise, derive_seed(job_seed, 1));
    const double truth_norm = fro_norm(truth.object);

    auto fill = [&](RepResult& slot, auto&& make_init) {
        slot.replication = rep;
        try {
            const TensorXd m0 = make_init();
            slot.final_rel_error = fro_norm(m0 - truth.object) / truth_norm;
            slot.phase1_rel_error = slot.final_rel_error;
        } catch (const NumericError& err) {
            slot.failed = true;
            slot.error = err.what();
        }
    };
    fill(results[0][job_index],
         [&] { return shrinkage_init_tensor(data, config.ranks, ShrinkageParams::plug_in()); });
    fill(results[1][job_index], [&] { return hosvd_init_tensor(data, config.ranks); });
}

nlohmann::ordered_json config_echo(const ExperimentConfig& config) {
    nlohmann::ordered_json echo;
    echo["scenario"] = format_scenario(config.scenario);
    if (config.scenario == Scenario::ConvergenceTensor ||
        config.scenario == Scenario::InitCompare) {
        echo["dims"] = config.dims;
        echo["ranks"] = config.ranks;
        echo["mode_min_sv"] = config.mode_min_sv;
    } else {
        echo["d1"] = config.d1;
        echo["d2"] = config.d2;
        echo["rank"] = config.rank;
    }
    echo["n_sweep"] = config.n_sweep;
    echo["noise"] = format_noise(config.noise);
    if (config.snr_db) echo["snr_db"] = *config.snr_db;
    nlohmann::ordered_json losses = nlohmann::ordered_json::array();
    for (const auto& loss : config.losses) losses.push_back(format_loss(loss));
    echo["losses"] = losses;
    echo["init"] = config.init;
    echo["max_iter"] = config.max_iter;
    echo["replications"] = config.replications;
    echo["seed"] = config.seed;
    echo["schedule"] = {{"c1", config.schedule.c1},
                        {"q", config.schedule.q},
                        {"c2", config.schedule.c2},
                        {"switch_threshold", config.schedule.switch_threshold},
                        {"switch_patience", config.schedule.switch_patience}};
    return echo;
}

}  // namespace

Scenario parse_scenario(const std::string& text) {
    const std::string key = normalize_key(text);
    if (key == "convergencematrix") return Scenario::ConvergenceMatrix;
    if (key == "convergencetensor") return Scenario::ConvergenceTensor;
    if (key == "accuracymatrix") return Scenario::AccuracyMatrix;
    if (key == "ratecheck") return Scenario::RateCheck;
    if (key == "initcompare") return Scenario::InitCompare;
    throw std::invalid_argument("config: unknown scenario '" + text + "'");
}

std::string format_scenario(Scenario scenario) {
    switch (scenario) {
        case Scenario::ConvergenceMatrix:
            return "convergence_matrix";
        case Scenario::ConvergenceTensor:
            return "convergence_tensor";
        case Scenario::AccuracyMatrix:
            return "accuracy_matrix";
        case Scenario::RateCheck:
            return "rate_check";
        case Scenario::InitCompare:
            return "init_compare";
    }
    return "unknown";
}

ExperimentConfig parse_config_text(const std::string& text) {
    ExperimentConfig config;
    std::istringstream stream(text);
    std::string line;
    bool saw_n = false;
    while (std::getline(stream, line)) {
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument("config: expected key = value, got '" + line + "'");
        const std::string key = normalize_key(trim(line.substr(0, eq)));
        const std::string value = trim(line.substr(eq + 1));
        if (value.empty()) throw std::invalid_argument("config: empty value for '" + key + "'");

        if (key == "scenario") {
            config.scenario = parse_scenario(value);
        } else if (key == "d1") {
            config.d1 = std::stol(value);
        } else if (key == "d2") {
            config.d2 = std::stol(value);
        } else if (key == "dims") {
            config.dims.clear();
            for (const auto& item : split(value, ',')) config.dims.push_back(std::stol(item));
        } else if (key == "rank" || key == "ranks" || key == "r") {
            const auto items = split(value, ',');
            if (items.size() == 1) {
                config.rank = std::stol(items[0]);
            } else {
                config.ranks.clear();
                for (const auto& item : items) config.ranks.push_back(std::stol(item));
            }
        } else if (key == "spectrum") {
            config.spectrum.clear();
            for (const auto& item : split(value, ',')) config.spectrum.push_back(std::stod(item));
        } else if (key == "modeminsv") {
            config.mode_min_sv = std::stod(value);
        } else if (key == "n") {
            config.n_sweep = {std::stol(value)};
            saw_n = true;
        } else if (key == "nsweep") {
            config.n_sweep.clear();
            for (const auto& item : split(value, ',')) config.n_sweep.push_back(std::stol(item));
            saw_n = true;
        } else if (key == "noise") {
            config.noise = parse_noise(value);
        } else if (key == "snrdb") {
            config.snr_db = std::stod(value);
        } else if (key == "loss" || key == "losses") {
            config.losses.clear();
            for (const auto& item : split(value, ',')) config.losses.push_back(parse_loss(item));
        } else if (key == "init") {
            config.init = value;
        } else if (key == "c1") {
            config.schedule.c1 = std::stod(value);
        } else if (key == "q") {
            config.schedule.q = std::stod(value);
        } else if (key == "c2") {
            config.schedule.c2 = std::stod(value);
        } else if (key == "switchthreshold") {
            config.schedule.switch_threshold = std::stod(value);
        } else if (key == "switchpatience") {
            config.schedule.switch_patience = std::stoi(value);
        } else if (key == "noisescaleoverride") {
            config.schedule.noise_scale_override = std::stod(value);
        } else if (key == "maxiter") {
            config.max_iter = std::stoi(value);
        } else if (key == "stoptol") {
            config.stop_tol = std::stod(value);
        } else if (key == "includebaselines" || key == "singlephasebaseline") {
            config.single_phase_baseline_on = parse_bool(value);
        } else if (key == "rgradbaseline") {
            config.rgrad_baseline_on = parse_bool(value);
        } else if (key == "rgradeta") {
            config.rgrad_eta = std::stod(value);
        } else if (key == "huberdeltafromnoise") {
            config.huber_delta_from_noise = parse_bool(value);
        } else if (key == "replications" || key == "reps") {
            config.replications = std::stoi(value);
        } else if (key == "seed") {
            config.seed = std::stoull(value);
        } else if (key == "outputdir" || key == "out") {
            config.output_dir = value;
        } else if (key == "writetraces") {
            config.write_traces = parse_bool(value);
        } else {
            throw std::invalid_argument("config: unknown key '" + key + "'");
        }
    }
    if (!saw_n) throw std::invalid_argument("config: n (or n_sweep) is required");

    // structural validation
    if (config.replications < 1)
        throw std::invalid_argument("config: replications must be >= 1");
    if (config.n_sweep.empty()) throw std::invalid_argument("config: empty n sweep");
    if (config.scenario == Scenario::RateCheck) {
        if (config.n_sweep.size() < 3)
            throw std::invalid_argument("config: rate_check needs an n_sweep with >= 3 points");
    } else if (config.n_sweep.size() != 1) {
        throw std::invalid_argument("config: n_sweep is only meaningful for rate_check");
    }
    const bool tensor_scenario = config.scenario == Scenario::ConvergenceTensor ||
                                 config.scenario == Scenario::InitCompare;
    if (tensor_scenario) {
        if (config.dims.size() < 2 || config.ranks.size() != config.dims.size())
            throw std::invalid_argument("config: tensor scenarios need dims and matching ranks");
        check_rank_feasible(config.dims, config.ranks);
        if (config.init == "spectral") config.init = "hosvd";
    }
    if (config.losses.empty()) throw std::invalid_argument("config: at least one loss");
    if (!(config.schedule.q > 0.0 && config.schedule.q <= 1.0))
        throw std::invalid_argument("config: q must lie in (0, 1]");
    if (config.snr_db && config.noise.kind == NoiseSpec::Kind::None)
        throw std::invalid_argument("config: snr_db requires a noise shape");

    // memory guard before any allocation happens
    Index d_star = 1;
    if (tensor_scenario)
        d_star = dims_product(config.dims);
    else
        d_star = config.d1 * config.d2;
    const Index n_max = *std::max_element(config.n_sweep.begin(), config.n_sweep.end());
    if (n_max * d_star > 270'000'000)
        throw std::invalid_argument("config: n * d* exceeds the memory guard");
    return config;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("config: cannot open " + path.string());
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return parse_config_text(buffer.str());
}

double fit_rate_slope(const std::vector<std::pair<Index, double>>& points) {
    if (points.size() < 3) throw std::invalid_argument("fit_rate_slope: needs >= 3 points");
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (const auto& [n, err] : points) {
        if (!(err > 0.0)) throw std::invalid_argument("fit_rate_slope: errors must be positive");
        const double x = std::log(static_cast<double>(n));
        const double y = std::log(err);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    const double count = static_cast<double>(points.size());
    return (count * sxy - sx * sy) / (count * sxx - sx * sx);
}

MatrixSolveResult single_phase_baseline(const MatrixDataset& data, const SolverConfig& config,
                                        const Eigen::MatrixXd& init,
                                        const std::optional<Eigen::MatrixXd>& truth) {
    SolverConfig fixed = config;
    auto* ps = std::get_if<PracticalSchedule>(&fixed.schedule);
    if (ps == nullptr)
        throw std::invalid_argument("single_phase_baseline: needs a practical schedule");
    ps->switch_enabled = false;
    return rsgrad_matrix(data, fixed, init, truth);
}

TensorSolveResult single_phase_baseline(const TensorDataset& data, const SolverConfig& config,
                                        const TensorXd& init,
                                        const std::optional<TensorXd>& truth) {
    SolverConfig fixed = config;
    auto* ps = std::get_if<PracticalSchedule>(&fixed.schedule);
    if (ps == nullptr)
        throw std::invalid_argument("single_phase_baseline: needs a practical schedule");
    ps->switch_enabled = false;
    return rsgrad_tensor(data, fixed, init, truth);
}

ExperimentReport run_experiment(const ExperimentConfig& config) {
    std::filesystem::create_directories(config.output_dir);

    // method axis
    std::vector<MethodSpec> methods;
    std::vector<std::string> method_names;
    if (config.scenario == Scenario::InitCompare) {
        method_names = {"shrinkage_init", "hosvd_init"};
    } else if (config.scenario == Scenario::RateCheck) {
        for (Index n : config.n_sweep)
            method_names.push_back("rsgrad_" + format_loss(config.losses.front()) + "_n" +
                                   std::to_string(n));
    } else {
        methods = solver_methods(config);
        for (const auto& ms : methods) method_names.push_back(ms.name);
    }

    const std::size_t reps = static_cast<std::size_t>(config.replications);
    const std::size_t sweep = config.n_sweep.size();
    const std::size_t jobs = (config.scenario == Scenario::RateCheck ? sweep : 1) * reps;
    const std::size_t method_count = method_names.size();

    std::vector<std::vector<RepResult>> results(
        method_count, std::vector<RepResult>(config.scenario == Scenario::RateCheck ? reps : jobs));
    std::vector<std::vector<SolveTrace>> traces(
        method_count, std::vector<SolveTrace>(config.scenario == Scenario::RateCheck ? 0 : jobs));

    // RateCheck stores per-n methods each with `reps` slots
    if (config.scenario == Scenario::RateCheck)
        for (auto& mr : results) mr.assign(reps, RepResult{});

    // memory-aware worker cap: one dataset per in-flight job
    Index d_star = config.scenario == Scenario::ConvergenceTensor ||
                           config.scenario == Scenario::InitCompare
                       ? dims_product(config.dims)
                       : config.d1 * config.d2;
    const Index n_max = *std::max_element(config.n_sweep.begin(), config.n_sweep.end());
    const double bytes_per_job = static_cast<double>(n_max * d_star) * 8.0 * 1.5;
    const int mem_workers =
        std::max(1, static_cast<int>(3.0e9 / std::max(bytes_per_job, 1.0)));
    std::counting_semaphore<4096> gate(std::min(mem_workers, 4096));

    run_chunks(jobs, [&](std::size_t job) {
        gate.acquire();
        struct Release {
            std::counting_semaphore<4096>& gate;
            ~Release() { gate.release(); }
        } releaser{gate};

        const std::uint64_t job_seed = derive_seed(config.seed, 1000 + job);
        const int rep = static_cast<int>(job % reps);
        switch (config.scenario) {
            case Scenario::ConvergenceMatrix:
            case Scenario::AccuracyMatrix:
                run_matrix_job(config, methods, config.n_sweep[0], job_seed, rep, results, traces,
                               job);
                break;
            case Scenario::ConvergenceTensor:
                run_tensor_job(config, methods, config.n_sweep[0], job_seed, rep, results, traces,
                               job);
                break;
            case Scenario::RateCheck: {
                const std::size_t n_idx = job / reps;
                std::vector<MethodSpec> one = solver_methods(config);
                one.resize(1);  // rate check runs the first loss, dual phase
                std::vector<std::vector<RepResult>> slot(1, std::vector<RepResult>(reps));
                std::vector<std::vector<SolveTrace>> trace_slot(1, std::vector<SolveTrace>(reps));
                run_matrix_job(config, one, config.n_sweep[n_idx], job_seed, rep, slot, trace_slot,
                               static_cast<std::size_t>(rep));
                results[n_idx][static_cast<std::size_t>(rep)] =
                    slot[0][static_cast<std::size_t>(rep)];
                break;
            }
            case Scenario::InitCompare:
                run_init_compare_job(config, config.n_sweep[0], job_seed, rep, results, job);
                break;
        }
    });

    // assemble the report
    ExperimentReport report;
    report.scenario = config.scenario;
    const bool convergence_traces = config.write_traces &&
                                    (config.scenario == Scenario::ConvergenceMatrix ||
                                     config.scenario == Scenario::ConvergenceTensor);
    for (std::size_t mi = 0; mi < method_count; ++mi) {
        MethodReport method;
        method.name = method_names[mi];
        method.reps = results[mi];
        if (convergence_traces) {
            for (std::size_t job = 0; job < results[mi].size(); ++job) {
                if (results[mi][job].failed) continue;
                const std::string file = format_scenario(config.scenario) + "_" +
                                         method_names[mi] + "_rep" + std::to_string(job) + ".csv";
                save_trace_csv(config.output_dir / file, traces[mi][job]);
                method.reps[job].trace_file = file;
            }
        }
        finalize_method(method);
        report.methods.push_back(std::move(method));
    }

    if (config.scenario == Scenario::RateCheck) {
        for (std::size_t n_idx = 0; n_idx < sweep; ++n_idx)
            report.rate_points.emplace_back(config.n_sweep[n_idx],
                                            report.methods[n_idx].median);
        report.rate_slope = fit_rate_slope(report.rate_points);
    }

    std::size_t failures = 0, total = 0;
    for (const auto& method : report.methods) {
        failures += static_cast<std::size_t>(method.failed_count);
        total += method.reps.size();
    }
    report.all_failed = total > 0 && failures == total;

    // summary json
    nlohmann::ordered_json summary;
    summary["schema_version"] = 1;
    summary["scenario"] = format_scenario(config.scenario);
    summary["config"] = config_echo(config);
    nlohmann::ordered_json methods_json = nlohmann::ordered_json::array();
    for (const auto& method : report.methods) {
        nlohmann::ordered_json mj;
        mj["name"] = method.name;
        nlohmann::ordered_json errs = nlohmann::ordered_json::array();
        nlohmann::ordered_json phase1 = nlohmann::ordered_json::array();
        nlohmann::ordered_json files = nlohmann::ordered_json::array();
        for (const auto& rep : method.reps) {
            if (rep.failed) {
                errs.push_back(nullptr);
                phase1.push_back(nullptr);
            } else {
                errs.push_back(rep.final_rel_error);
                phase1.push_back(rep.phase1_rel_error);
            }
            if (!rep.trace_file.empty()) files.push_back(rep.trace_file);
        }
        mj["final_rel_errors"] = errs;
        mj["phase1_rel_errors"] = phase1;
        mj["median"] = method.median;
        mj["q1"] = method.q1;
        mj["q3"] = method.q3;
        mj["failed"] = method.failed_count;
        if (!files.empty()) mj["trace_files"] = files;
        methods_json.push_back(std::move(mj));
    }
    summary["methods"] = methods_json;
    if (report.rate_slope) {
        nlohmann::ordered_json rate;
        nlohmann::ordered_json pts = nlohmann::ordered_json::array();
        for (const auto& [n, err] : report.rate_points) pts.push_back({n, err});
        rate["points"] = pts;
        rate["slope"] = *report.rate_slope;
        summary["rate"] = rate;
    }
    report.summary_file =
        config.output_dir / (format_scenario(config.scenario) + "_summary.json");
    std::ofstream out(report.summary_file);
    if (!out)
        throw std::invalid_argument("run_experiment: cannot write " +
                                    report.summary_file.string());
    out << summary.dump(2) << "\n";
    return report;
}

}  // namespace rlrk
