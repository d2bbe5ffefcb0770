#include <CLI11.hpp>

#include <cstdio>
#include <exception>
#include <iostream>
#include <string>
#include <vector>

#include "rlrk/errors.hpp"
#include "rlrk/harness.hpp"
#include "rlrk/io.hpp"

namespace {

int finish(const rlrk::ExperimentReport& report) {
    for (const auto& method : report.methods) {
        std::printf("%-28s median rel_error %-12s (q1 %s, q3 %s)%s\n", method.name.c_str(),
                    rlrk::format_double(method.median).c_str(),
                    rlrk::format_double(method.q1).c_str(),
                    rlrk::format_double(method.q3).c_str(),
                    method.failed_count > 0
                        ? (" [" + std::to_string(method.failed_count) + " failed]").c_str()
                        : "");
    }
    if (report.rate_slope)
        std::printf("rate slope (log err vs log n): %s\n",
                    rlrk::format_double(*report.rate_slope).c_str());
    std::printf("summary: %s\n", report.summary_file.string().c_str());
    if (report.all_failed) {
        std::fprintf(stderr, "error: every replication failed numerically\n");
        return 3;
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"robust low-rank matrix/tensor recovery experiments"};
    app.require_subcommand(1);

    std::string config_path;
    auto* run = app.add_subcommand("run", "run an experiment described by a config file");
    run->add_option("config", config_path, "key = value config file")->required();

    // rate-check shortcut flags
    long d = 80, r = 5;
    std::vector<long> n_sweep;
    std::string loss = "absolute", noise = "gaussian:1.0", out_dir = "out";
    double snr_db = 0.0;
    bool have_snr = false;
    int reps = 10;
    unsigned long long seed = 1;
    int max_iter = 300;
    auto* rate = app.add_subcommand("rate-check", "error-vs-n slope check");
    rate->add_option("--d", d, "square matrix dimension");
    rate->add_option("--r", r, "rank");
    rate->add_option("--n-sweep", n_sweep, "sample sizes (>= 3)")->delimiter(',');
    rate->add_option("--loss", loss, "loss spec");
    rate->add_option("--noise", noise, "noise spec");
    rate->add_option("--snr-db", snr_db, "target SNR in dB")->each([&](const std::string&) {
        have_snr = true;
    });
    rate->add_option("--reps", reps, "replications per n");
    rate->add_option("--seed", seed, "master seed");
    rate->add_option("--max-iter", max_iter, "iterations per solve");
    rate->add_option("--out", out_dir, "output directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 2;
    }

    try {
        rlrk::ExperimentConfig config;
        if (run->parsed()) {
            config = rlrk::load_config(config_path);
        } else {
            std::string text = "scenario = rate_check\n";
            text += "d1 = " + std::to_string(d) + "\n";
            text += "d2 = " + std::to_string(d) + "\n";
            text += "rank = " + std::to_string(r) + "\n";
            text += "n_sweep = ";
            for (std::size_t i = 0; i < n_sweep.size(); ++i)
                text += (i ? "," : "") + std::to_string(n_sweep[i]);
            text += "\n";
            text += "loss = " + loss + "\n";
            text += "noise = " + noise + "\n";
            if (have_snr) text += "snr_db = " + std::to_string(snr_db) + "\n";
            text += "reps = " + std::to_string(reps) + "\n";
            text += "seed = " + std::to_string(seed) + "\n";
            text += "max_iter = " + std::to_string(max_iter) + "\n";
            text += "output_dir = " + out_dir + "\n";
            config = rlrk::parse_config_text(text);
        }
        return finish(rlrk::run_experiment(config));
    } catch (const std::invalid_argument& e) {
        std::fprintf(stderr, "argument error: %s\n", e.what());
        return 2;
    } catch (const rlrk::NumericError& e) {
        std::fprintf(stderr, "numeric error: %s\n", e.what());
        return 3;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
}
