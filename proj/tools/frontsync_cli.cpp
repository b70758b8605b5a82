#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "frontsync/experiment.hpp"

int main(int argc, char** argv) {
    CLI::App app{"fronthaul quantization-spectrum optimizer and synchronization link simulator"};

    std::string config_path;
    std::string plot_csv;
    frontsync::RunOverrides overrides;
    std::uint64_t seed = 0;
    long trials = 0;
    std::string out;
    int threads = -1;

    app.add_option("config", config_path, "experiment config file (key = value lines)");
    auto* seed_opt = app.add_option("--seed", seed, "override the experiment seed");
    auto* trials_opt = app.add_option("--trials", trials, "override the trial count");
    auto* out_opt = app.add_option("--out", out, "output path base (<out>.csv, <out>.meta.json)");
    auto* threads_opt = app.add_option("--threads", threads, "worker threads (0 = all cores)");
    app.add_flag("--plot-script", overrides.plot_script,
                 "also write a gnuplot script next to the CSV");
    app.add_option("--emit-plot", plot_csv,
                   "write a gnuplot script for an existing result CSV and exit");

    CLI11_PARSE(app, argc, argv);

    if (!plot_csv.empty()) {
        try {
            std::cout << frontsync::emit_plot_script(plot_csv) << "\n";
            return 0;
        } catch (const std::exception& e) {
            std::cerr << "error: " << e.what() << "\n";
            return 2;
        }
    }
    if (config_path.empty()) {
        std::cerr << "error: a config file is required (see --help)\n";
        return 2;
    }
    if (!seed_opt->empty()) overrides.seed = seed;
    if (!trials_opt->empty()) overrides.trials = trials;
    if (!out_opt->empty()) overrides.output = out;
    if (!threads_opt->empty()) overrides.threads = threads;

    return frontsync::run(config_path, overrides);
}
