#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "frontsync/common.hpp"
#include "frontsync/config.hpp"
#include "frontsync/link_sim.hpp"
#include "frontsync/metrics.hpp"
#include "frontsync/psd_optimizer.hpp"
#include "frontsync/quantizer.hpp"

namespace frontsync {

inline constexpr const char* version_string = "frontsync 1.0.0";

/// Raised on malformed configuration files; maps to exit code 2.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

enum class ExperimentKind {
    optimize_psd,
    crb_sweep,
    mse_sweep,
    ser_sweep,
    validate_appendix,
    validate_scalar,
};

inline const char* to_string(ExperimentKind k) {
    switch (k) {
        case ExperimentKind::optimize_psd: return "optimize-psd";
        case ExperimentKind::crb_sweep: return "crb-sweep";
        case ExperimentKind::mse_sweep: return "mse-sweep";
        case ExperimentKind::ser_sweep: return "ser-sweep";
        case ExperimentKind::validate_appendix: return "validate-appendix";
        case ExperimentKind::validate_scalar: return "validate-scalar";
    }
    return "?";
}

struct ExperimentConfig {
    ExperimentKind kind = ExperimentKind::mse_sweep;
    double amplitude = 0.7;
    double symbol_period = 1.0;
    int oversampling = 2;
    int pilot_len = 16;
    int data_len = 84;
    double noise_psd = 1.0;
    double capacity = 3.0;
    int pulse_truncation = 8;
    double snr_p_db = 20.0;
    double snr_d_db = 20.0;
    std::string sweep_variable = "snr_p_db";
    std::vector<double> sweep_values;
    long trials = 1000;
    std::uint64_t seed = 1;
    Constellation constellation = Constellation::qpsk;
    CompressionModel quantizer_model = CompressionModel::gaussian;
    bool data_quantization_budget = false;  // ser-sweep: budget-matched sigma2_qd
    bool include_perfect_sync = true;
    double delta_theta_max = 0.1;  // validate-appendix
    std::string output;
    int threads = 0;

    /// System parameters at one sweep point.
    SystemConfig system_at(double value) const {
        double sp = snr_p_db, sd = snr_d_db, cap = capacity;
        if (sweep_variable == "snr_p_db") {
            sp = value;
        } else if (sweep_variable == "snr_db") {
            sp = sd = value;
        } else if (sweep_variable == "capacity") {
            cap = value;
        }
        SystemConfig cfg = SystemConfig::from_snr_db(sp, sd, oversampling, pilot_len, data_len,
                                                     amplitude, cap, noise_psd, symbol_period);
        cfg.pulse_truncation = pulse_truncation;
        return cfg;
    }
};

namespace detail {

inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

inline double parse_double(const std::string& key, const std::string& value) {
    try {
        std::size_t pos = 0;
        const double v = std::stod(value, &pos);
        if (pos != value.size()) throw std::invalid_argument("trailing");
        return v;
    } catch (const std::exception&) {
        throw ConfigError("config: key '" + key + "' has non-numeric value '" + value + "'");
    }
}

inline long parse_long(const std::string& key, const std::string& value) {
    const double v = parse_double(key, value);
    if (v != std::floor(v)) throw ConfigError("config: key '" + key + "' must be an integer");
    return static_cast<long>(v);
}

inline bool parse_bool(const std::string& key, const std::string& value) {
    if (value == "true" || value == "1" || value == "yes") return true;
    if (value == "false" || value == "0" || value == "no") return false;
    throw ConfigError("config: key '" + key + "' must be a boolean, got '" + value + "'");
}

inline std::vector<double> parse_list(const std::string& key, const std::string& value) {
    std::vector<double> out;
    std::stringstream ss(value);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (item.empty()) continue;
        out.push_back(parse_double(key, item));
    }
    if (out.empty()) throw ConfigError("config: key '" + key + "' must list at least one value");
    return out;
}

}  // namespace detail

/// Strict flat key=value parser; '#' starts a comment, unknown keys rejected.
inline ExperimentConfig parse_experiment_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config: cannot read file '" + path + "'");

    std::map<std::string, std::string> kv;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = detail::trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config: line " + std::to_string(lineno) + " is not 'key = value'");
        const std::string key = detail::trim(line.substr(0, eq));
        const std::string value = detail::trim(line.substr(eq + 1));
        if (key.empty() || value.empty())
            throw ConfigError("config: line " + std::to_string(lineno) + " has empty key or value");
        if (kv.count(key)) throw ConfigError("config: duplicate key '" + key + "'");
        kv[key] = value;
    }

    ExperimentConfig cfg;
    const auto take = [&kv](const char* key) -> std::optional<std::string> {
        const auto it = kv.find(key);
        if (it == kv.end()) return std::nullopt;
        std::string v = it->second;
        kv.erase(it);
        return v;
    };

    const auto kind = take("kind");
    if (!kind) throw ConfigError("config: missing required key 'kind'");
    if (*kind == "optimize-psd") cfg.kind = ExperimentKind::optimize_psd;
    else if (*kind == "crb-sweep") cfg.kind = ExperimentKind::crb_sweep;
    else if (*kind == "mse-sweep") cfg.kind = ExperimentKind::mse_sweep;
    else if (*kind == "ser-sweep") cfg.kind = ExperimentKind::ser_sweep;
    else if (*kind == "validate-appendix") cfg.kind = ExperimentKind::validate_appendix;
    else if (*kind == "validate-scalar") cfg.kind = ExperimentKind::validate_scalar;
    else throw ConfigError("config: unrecognized kind '" + *kind + "'");

    if (auto v = take("amplitude")) cfg.amplitude = detail::parse_double("amplitude", *v);
    if (auto v = take("symbol_period")) cfg.symbol_period = detail::parse_double("symbol_period", *v);
    if (auto v = take("oversampling"))
        cfg.oversampling = static_cast<int>(detail::parse_long("oversampling", *v));
    if (auto v = take("pilot_len")) cfg.pilot_len = static_cast<int>(detail::parse_long("pilot_len", *v));
    if (auto v = take("data_len")) cfg.data_len = static_cast<int>(detail::parse_long("data_len", *v));
    if (auto v = take("noise_psd")) cfg.noise_psd = detail::parse_double("noise_psd", *v);
    if (auto v = take("capacity")) cfg.capacity = detail::parse_double("capacity", *v);
    if (auto v = take("pulse_truncation"))
        cfg.pulse_truncation = static_cast<int>(detail::parse_long("pulse_truncation", *v));
    if (auto v = take("snr_p_db")) cfg.snr_p_db = detail::parse_double("snr_p_db", *v);
    if (auto v = take("snr_d_db")) cfg.snr_d_db = detail::parse_double("snr_d_db", *v);
    if (auto v = take("sweep_variable")) cfg.sweep_variable = *v;
    if (auto v = take("sweep_values")) cfg.sweep_values = detail::parse_list("sweep_values", *v);
    if (auto v = take("trials")) cfg.trials = detail::parse_long("trials", *v);
    if (auto v = take("seed")) cfg.seed = static_cast<std::uint64_t>(detail::parse_long("seed", *v));
    if (auto v = take("constellation")) {
        if (*v == "bpsk") cfg.constellation = Constellation::bpsk;
        else if (*v == "qpsk") cfg.constellation = Constellation::qpsk;
        else throw ConfigError("config: unrecognized constellation '" + *v + "'");
    }
    if (auto v = take("quantizer_model")) {
        if (*v == "gaussian") cfg.quantizer_model = CompressionModel::gaussian;
        else if (*v == "scalar") cfg.quantizer_model = CompressionModel::scalar_uniform;
        else throw ConfigError("config: unrecognized quantizer_model '" + *v + "'");
    }
    if (auto v = take("data_quantization")) {
        if (*v == "none") cfg.data_quantization_budget = false;
        else if (*v == "budget") cfg.data_quantization_budget = true;
        else throw ConfigError("config: unrecognized data_quantization '" + *v + "'");
    }
    if (auto v = take("include_perfect_sync"))
        cfg.include_perfect_sync = detail::parse_bool("include_perfect_sync", *v);
    if (auto v = take("delta_theta_max")) cfg.delta_theta_max = detail::parse_double("delta_theta_max", *v);
    if (auto v = take("output")) cfg.output = *v;
    if (auto v = take("threads")) cfg.threads = static_cast<int>(detail::parse_long("threads", *v));

    if (!kv.empty()) {
        std::string keys;
        for (const auto& [k, _] : kv) keys += (keys.empty() ? "" : ", ") + k;
        throw ConfigError("config: unknown key(s): " + keys);
    }

    if (cfg.sweep_values.empty()) throw ConfigError("config: missing required key 'sweep_values'");
    if (cfg.sweep_variable != "snr_p_db" && cfg.sweep_variable != "snr_db" &&
        cfg.sweep_variable != "capacity" && cfg.sweep_variable != "delta_tau_max")
        throw ConfigError("config: unrecognized sweep_variable '" + cfg.sweep_variable + "'");
    for (double v : cfg.sweep_values)
        if (!std::isfinite(v)) throw ConfigError("config: sweep_values must be finite");
    if (cfg.output.empty()) {
        cfg.output = std::filesystem::path(path).stem().string();
        if (cfg.output.empty()) cfg.output = "frontsync_out";
    }
    return cfg;
}

/// Plot-ready named columns plus the resolved configuration that produced them.
struct ResultTable {
    std::vector<std::string> columns;
    std::vector<std::vector<double>> rows;
    nlohmann::json metadata;
    bool convergence_warning = false;
};

namespace detail {

inline std::string format_value(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.9g", v);
    return buf;
}

inline nlohmann::json metadata_json(const ExperimentConfig& cfg) {
    nlohmann::json meta;
    meta["provenance"] = version_string;
    meta["kind"] = to_string(cfg.kind);
    meta["seed"] = cfg.seed;
    meta["trials"] = cfg.trials;
    meta["system"] = {{"amplitude", cfg.amplitude},
                      {"symbol_period", cfg.symbol_period},
                      {"oversampling", cfg.oversampling},
                      {"pilot_len", cfg.pilot_len},
                      {"data_len", cfg.data_len},
                      {"noise_psd", cfg.noise_psd},
                      {"capacity", cfg.capacity},
                      {"pulse_truncation", cfg.pulse_truncation},
                      {"snr_p_db", cfg.snr_p_db},
                      {"snr_d_db", cfg.snr_d_db}};
    meta["sweep"] = {{"variable", cfg.sweep_variable}, {"values", cfg.sweep_values}};
    meta["constellation"] = to_string(cfg.constellation);
    meta["quantizer_model"] =
        cfg.quantizer_model == CompressionModel::gaussian ? "gaussian" : "scalar";
    meta["data_quantization"] = cfg.data_quantization_budget ? "budget" : "none";
    meta["threads"] = cfg.threads;
    return meta;
}

}  // namespace detail

inline void write_result_table(const ResultTable& table, const std::string& csv_path,
                               const std::string& meta_path) {
    std::ofstream csv(csv_path);
    if (!csv) throw std::runtime_error("cannot write '" + csv_path + "'");
    for (std::size_t c = 0; c < table.columns.size(); ++c)
        csv << (c ? "," : "") << table.columns[c];
    csv << "\n";
    for (const auto& row : table.rows) {
        for (std::size_t c = 0; c < row.size(); ++c)
            csv << (c ? "," : "") << detail::format_value(row[c]);
        csv << "\n";
    }
    std::ofstream meta(meta_path);
    if (!meta) throw std::runtime_error("cannot write '" + meta_path + "'");
    meta << table.metadata.dump(2) << "\n";
}

/// Execute one experiment; rows come out in sweep order.
inline ResultTable run_experiment(const ExperimentConfig& cfg) {
    ResultTable table;
    table.metadata = detail::metadata_json(cfg);
    const std::size_t n_points = cfg.sweep_values.size();
    std::vector<std::vector<std::vector<double>>> point_rows(n_points);
    std::vector<char> point_warn(n_points, 0);

    const auto run_point = [&](std::size_t p, int inner_threads) {
        const double value = cfg.sweep_values[p];
        auto& rows = point_rows[p];
        switch (cfg.kind) {
            case ExperimentKind::optimize_psd: {
                const SystemConfig sys = cfg.system_at(value);
                auto [grid, trace] = optimize_psd(sys);
                const InvPsdGrid white = white_psd_baseline(sys);
                if (!trace.converged) point_warn[p] = 1;
                for (int n = 0; n < grid.u.branches(); ++n)
                    for (int k = 0; k < grid.u.bins(); ++k)
                        rows.push_back({value, static_cast<double>(n),
                                        static_cast<double>(centered_index(k, sys.pilot_len)),
                                        grid.u(n, k), white.u(n, k),
                                        static_cast<double>(trace.iterations()),
                                        trace.converged ? 0.0 : 1.0});
                break;
            }
            case ExperimentKind::crb_sweep: {
                const SystemConfig sys = cfg.system_at(value);
                auto [grid, trace] = optimize_psd(sys);
                if (!trace.converged) point_warn[p] = 1;
                const InvPsdGrid white = white_psd_baseline(sys);
                const CrbPair c_opt = crb(sys, grid);
                const CrbPair c_white = crb(sys, white);
                const CrbPair c_unq = crb(sys, InvPsdGrid::unquantized(sys));
                rows.push_back({value, c_opt.crb_tau, c_opt.crb_theta, c_white.crb_tau,
                                c_white.crb_theta, c_unq.crb_tau, c_unq.crb_theta,
                                grid.sigma2_qd});
                break;
            }
            case ExperimentKind::mse_sweep: {
                const SystemConfig sys = cfg.system_at(value);
                auto [grid, trace] = optimize_psd(sys);
                if (!trace.converged) point_warn[p] = 1;
                const InvPsdGrid white = white_psd_baseline(sys);
                const TrialStats s_opt = run_mse_experiment(sys, grid, cfg.quantizer_model,
                                                            cfg.trials, cfg.seed, inner_threads);
                const TrialStats s_white = run_mse_experiment(sys, white, cfg.quantizer_model,
                                                              cfg.trials, cfg.seed, inner_threads);
                const CrbPair c_opt = crb(sys, grid);
                const CrbPair c_white = crb(sys, white);
                rows.push_back({value, s_opt.mse_tau, s_opt.se_mse_tau, s_opt.mse_theta,
                                s_opt.se_mse_theta, s_white.mse_tau, s_white.se_mse_tau,
                                s_white.mse_theta, s_white.se_mse_theta, c_opt.crb_tau,
                                c_opt.crb_theta, c_white.crb_tau, c_white.crb_theta});
                break;
            }
            case ExperimentKind::ser_sweep: {
                const SystemConfig sys = cfg.system_at(value);
                auto [grid, trace] = optimize_psd(sys);
                if (!trace.converged) point_warn[p] = 1;
                const InvPsdGrid white = white_psd_baseline(sys);
                const double s2qd =
                    cfg.data_quantization_budget ? data_phase_noise_variance(sys) : 0.0;
                SerOptions opts;
                opts.threads = inner_threads;
                const TrialStats s_opt = run_ser_experiment(sys, grid, s2qd, cfg.constellation,
                                                            cfg.trials, cfg.seed, opts);
                const TrialStats s_white = run_ser_experiment(sys, white, s2qd, cfg.constellation,
                                                              cfg.trials, cfg.seed, opts);
                std::vector<double> row{value, s_opt.ser, s_opt.se_ser, s_white.ser,
                                        s_white.se_ser};
                if (cfg.include_perfect_sync) {
                    SerOptions genie = opts;
                    genie.perfect_sync = true;
                    const TrialStats s_ps = run_ser_experiment(sys, grid, s2qd, cfg.constellation,
                                                               cfg.trials, cfg.seed, genie);
                    row.push_back(s_ps.ser);
                    row.push_back(s_ps.se_ser);
                }
                row.push_back(s2qd);
                rows.push_back(std::move(row));
                break;
            }
            case ExperimentKind::validate_appendix: {
                const SystemConfig sys = cfg.system_at(0.0);
                const double dtau_max = value * sys.symbol_period;
                const ErrorTermPowers meas = measure_error_term_powers(
                    sys, dtau_max, cfg.delta_theta_max, cfg.trials, cfg.seed);
                const LinearApproxCoeffs lin =
                    linear_approx_coeffs(dtau_max, cfg.delta_theta_max, sys);
                const CrbPair eq{dtau_max * dtau_max / 12.0,
                                 cfg.delta_theta_max * cfg.delta_theta_max / 12.0};
                const ErrorTermPowers model = error_term_powers(sys, eq, lin);
                rows.push_back({value, meas.p_signal, model.p_signal, meas.p_phase_noise,
                                model.p_phase_noise, meas.p_isi, model.p_isi});
                break;
            }
            case ExperimentKind::validate_scalar: {
                const SystemConfig sys = cfg.system_at(value);
                auto [grid, trace] = optimize_psd(sys);
                if (!trace.converged) point_warn[p] = 1;
                const InvPsdGrid white = white_psd_baseline(sys);
                const TrialStats s_opt =
                    run_mse_experiment(sys, grid, CompressionModel::scalar_uniform, cfg.trials,
                                       cfg.seed, inner_threads);
                const TrialStats s_uni =
                    run_mse_experiment(sys, white, CompressionModel::scalar_uniform, cfg.trials,
                                       cfg.seed, inner_threads);
                const double bits_opt = scalar_quantizer_bits(design_scalar_quantizer(grid, sys));
                const double bits_uni = scalar_quantizer_bits(design_scalar_quantizer(white, sys));
                rows.push_back({value, s_opt.mse_tau, s_opt.se_mse_tau, s_opt.mse_theta,
                                s_opt.se_mse_theta, s_uni.mse_tau, s_uni.se_mse_tau,
                                s_uni.mse_theta, s_uni.se_mse_theta, bits_opt, bits_uni});
                break;
            }
        }
    };

    switch (cfg.kind) {
        case ExperimentKind::optimize_psd:
            table.columns = {"snr_p_db", "branch", "k_c", "inv_psd", "inv_psd_white",
                             "dc_iterations", "warning"};
            break;
        case ExperimentKind::crb_sweep:
            table.columns = {"snr_p_db",     "crb_tau_opt",   "crb_theta_opt", "crb_tau_white",
                             "crb_theta_white", "crb_tau_unq", "crb_theta_unq", "sigma2_qd"};
            break;
        case ExperimentKind::mse_sweep:
            table.columns = {"snr_p_db",      "mse_tau_opt",    "se_tau_opt",    "mse_theta_opt",
                             "se_theta_opt",  "mse_tau_white",  "se_tau_white",  "mse_theta_white",
                             "se_theta_white", "crb_tau_opt",   "crb_theta_opt", "crb_tau_white",
                             "crb_theta_white"};
            break;
        case ExperimentKind::ser_sweep:
            table.columns = {"snr_db", "ser_opt", "se_ser_opt", "ser_white", "se_ser_white"};
            if (cfg.include_perfect_sync) {
                table.columns.push_back("ser_perfect");
                table.columns.push_back("se_ser_perfect");
            }
            table.columns.push_back("sigma2_qd");
            break;
        case ExperimentKind::validate_appendix:
            table.columns = {"delta_tau_max", "p_signal_meas", "p_signal_model",
                             "p_phase_meas",  "p_phase_model", "p_isi_meas",
                             "p_isi_model"};
            break;
        case ExperimentKind::validate_scalar:
            table.columns = {"snr_p_db",       "mse_tau_opt",     "se_tau_opt",
                             "mse_theta_opt",  "se_theta_opt",    "mse_tau_uniform",
                             "se_tau_uniform", "mse_theta_uniform", "se_theta_uniform",
                             "bits_opt",       "bits_uniform"};
            break;
    }

    // Sweep points dispatched to a worker pool; each point runs its trials on
    // a single thread. Rows are emitted in sweep order below.
    int outer = cfg.threads <= 0 ? static_cast<int>(std::thread::hardware_concurrency())
                                 : cfg.threads;
    outer = std::max(1, std::min<int>(outer, static_cast<int>(n_points)));
    const int inner = outer > 1 ? 1 : cfg.threads;
    {
        std::atomic<std::size_t> next{0};
        std::vector<std::thread> pool;
        std::vector<std::exception_ptr> errors(n_points);
        for (int w = 0; w < outer; ++w) {
            pool.emplace_back([&] {
                for (;;) {
                    const std::size_t p = next.fetch_add(1);
                    if (p >= n_points) return;
                    try {
                        run_point(p, inner);
                    } catch (...) {
                        errors[p] = std::current_exception();
                    }
                }
            });
        }
        for (auto& th : pool) th.join();
        for (const auto& e : errors)
            if (e) std::rethrow_exception(e);
    }

    for (std::size_t p = 0; p < n_points; ++p) {
        if (point_warn[p]) table.convergence_warning = true;
        for (auto& row : point_rows[p]) table.rows.push_back(std::move(row));
    }
    table.metadata["convergence_warning"] = table.convergence_warning;
    return table;
}

/// Write a standalone gnuplot script reproducing the table's figure layout.
inline std::string emit_plot_script(const std::string& csv_path) {
    std::ifstream in(csv_path);
    if (!in) throw std::runtime_error("emit_plot_script: cannot read '" + csv_path + "'");
    std::string header;
    if (!std::getline(in, header) || header.find(',') == std::string::npos)
        throw std::runtime_error("emit_plot_script: '" + csv_path + "' is not a result table");
    std::vector<std::string> cols;
    {
        std::stringstream ss(header);
        std::string c;
        while (std::getline(ss, c, ',')) cols.push_back(detail::trim(c));
    }
    const auto col_index = [&cols](const std::string& name) -> int {
        for (std::size_t i = 0; i < cols.size(); ++i)
            if (cols[i] == name) return static_cast<int>(i) + 1;  // gnuplot is 1-based
        return -1;
    };

    const std::string script_path = csv_path + ".gp";
    std::ofstream gp(script_path);
    if (!gp) throw std::runtime_error("emit_plot_script: cannot write '" + script_path + "'");
    gp << "# generated by " << version_string << "\n";
    gp << "set datafile separator ','\n";
    gp << "set key top right\n";
    gp << "set grid\n";

    if (col_index("inv_psd") > 0) {
        gp << "set xlabel 'frequency index k_c'\n";
        gp << "set ylabel 'inverse quantization-noise PSD'\n";
        gp << "plot '" << csv_path << "' using " << col_index("k_c") << ":" << col_index("inv_psd")
           << " with impulses lw 2 title 'optimized', \\\n"
           << "     '" << csv_path << "' using " << col_index("k_c") << ":"
           << col_index("inv_psd_white") << " with points pt 7 title 'white'\n";
    } else if (col_index("ser_opt") > 0) {
        gp << "set xlabel 'SNR [dB]'\n";
        gp << "set ylabel 'symbol error rate'\n";
        gp << "set logscale y 10\n";
        gp << "plot '" << csv_path << "' using 1:" << col_index("ser_opt")
           << " with linespoints title 'optimized PSD', \\\n"
           << "     '" << csv_path << "' using 1:" << col_index("ser_white")
           << " with linespoints title 'white PSD'";
        if (col_index("ser_perfect") > 0)
            gp << ", \\\n     '" << csv_path << "' using 1:" << col_index("ser_perfect")
               << " with lines dt 2 title 'perfect sync'";
        gp << "\n";
    } else if (col_index("mse_tau_opt") > 0 || col_index("crb_tau_opt") > 0) {
        const bool has_mse = col_index("mse_tau_opt") > 0;
        gp << "set xlabel 'SNR_p [dB]'\n";
        gp << "set ylabel 'MSE'\n";
        gp << "set logscale y 10\n";
        if (has_mse) {
            const int w = col_index("mse_tau_white") > 0 ? col_index("mse_tau_white")
                                                         : col_index("mse_tau_uniform");
            gp << "plot '" << csv_path << "' using 1:" << col_index("mse_tau_opt")
               << " with linespoints title 'timing, optimized', \\\n"
               << "     '" << csv_path << "' using 1:" << w
               << " with linespoints title 'timing, reference', \\\n"
               << "     '" << csv_path << "' using 1:" << col_index("mse_theta_opt")
               << " with linespoints title 'phase, optimized'\n";
        } else {
            gp << "plot '" << csv_path << "' using 1:" << col_index("crb_tau_opt")
               << " with linespoints title 'timing bound, optimized', \\\n"
               << "     '" << csv_path << "' using 1:" << col_index("crb_tau_white")
               << " with linespoints title 'timing bound, white'\n";
        }
    } else if (col_index("p_signal_meas") > 0) {
        gp << "set xlabel 'delta_tau_max / T'\n";
        gp << "set ylabel 'power'\n";
        gp << "set logscale y 10\n";
        gp << "plot '" << csv_path << "' using 1:2 with points title 'signal, measured', \\\n"
           << "     '" << csv_path << "' using 1:3 with lines title 'signal, model', \\\n"
           << "     '" << csv_path << "' using 1:6 with points title 'isi, measured', \\\n"
           << "     '" << csv_path << "' using 1:7 with lines title 'isi, model'\n";
    } else {
        throw std::runtime_error("emit_plot_script: unrecognized table layout in '" + csv_path + "'");
    }
    return script_path;
}

/// Run a config file end to end. Returns 0 on success, 2 on configuration
/// errors, 3 when the run finished but an optimization did not converge.
struct RunOverrides {
    std::optional<std::uint64_t> seed;
    std::optional<long> trials;
    std::optional<std::string> output;
    std::optional<int> threads;
    bool plot_script = false;
};

inline int run(const std::string& config_path, const RunOverrides& overrides = {},
               std::ostream& diag = std::cerr) {
    ExperimentConfig cfg;
    try {
        cfg = parse_experiment_config(config_path);
        if (overrides.seed) cfg.seed = *overrides.seed;
        if (overrides.trials) cfg.trials = *overrides.trials;
        if (overrides.output) cfg.output = *overrides.output;
        if (overrides.threads) cfg.threads = *overrides.threads;
        cfg.system_at(cfg.sweep_values.front()).validate();
    } catch (const std::exception& e) {
        diag << "error: " << e.what() << "\n";
        return 2;
    }
    try {
        const ResultTable table = run_experiment(cfg);
        const std::string csv_path = cfg.output + ".csv";
        const std::string meta_path = cfg.output + ".meta.json";
        write_result_table(table, csv_path, meta_path);
        diag << "wrote " << csv_path << " (" << table.rows.size() << " rows)\n";
        if (overrides.plot_script) diag << "wrote " << emit_plot_script(csv_path) << "\n";
        if (table.convergence_warning) {
            diag << "warning: at least one optimization did not converge\n";
            return 3;
        }
        return 0;
    } catch (const std::exception& e) {
        diag << "error: " << e.what() << "\n";
        return 1;
    }
}

}  // namespace frontsync
