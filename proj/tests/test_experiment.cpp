#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "frontsync/experiment.hpp"

using namespace frontsync;

namespace {

namespace fs = std::filesystem;

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() /
               ("frontsync_test_" + std::to_string(::getpid()) + "_" +
                std::to_string(counter()++));
        fs::create_directories(path);
    }
    ~TempDir() { std::error_code ec; fs::remove_all(path, ec); }
    static int& counter() {
        static int c = 0;
        return c;
    }
};

fs::path write_config(const fs::path& dir, const std::string& name, const std::string& body) {
    const fs::path p = dir / name;
    std::ofstream(p) << body;
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

const char* tiny_psd_config =
    "kind = optimize-psd\n"
    "oversampling = 1\n"
    "pilot_len = 8\n"
    "data_len = 16\n"
    "capacity = 2\n"
    "sweep_variable = snr_p_db\n"
    "sweep_values = 5, 10\n"
    "seed = 9\n";

}  // namespace

TEST_CASE("config parsing") {
    TempDir dir;
    SECTION("a full config round-trips into typed fields") {
        const auto p = write_config(dir.path, "ok.cfg",
                                    "# comment line\n"
                                    "kind = mse-sweep\n"
                                    "oversampling = 2\n"
                                    "pilot_len = 16\n"
                                    "data_len = 84\n"
                                    "amplitude = 0.7\n"
                                    "capacity = 3\n"
                                    "snr_d_db = 12.5\n"
                                    "sweep_variable = snr_p_db\n"
                                    "sweep_values = 0, 5, 10\n"
                                    "trials = 500\n"
                                    "seed = 42\n"
                                    "constellation = bpsk\n"
                                    "quantizer_model = scalar\n"
                                    "threads = 2\n");
        const ExperimentConfig cfg = parse_experiment_config(p.string());
        REQUIRE(cfg.kind == ExperimentKind::mse_sweep);
        REQUIRE(cfg.oversampling == 2);
        REQUIRE(cfg.sweep_values.size() == 3);
        REQUIRE(cfg.seed == 42);
        REQUIRE(cfg.constellation == Constellation::bpsk);
        REQUIRE(cfg.quantizer_model == CompressionModel::scalar_uniform);
        REQUIRE(cfg.snr_d_db == 12.5);
        REQUIRE(cfg.output == "ok");
        const SystemConfig sys = cfg.system_at(10.0);
        REQUIRE(sys.snr_p() == Catch::Approx(10.0).margin(1e-9));
        REQUIRE(sys.snr_d() == Catch::Approx(db_to_linear(12.5)).epsilon(1e-12));
    }
    SECTION("unknown keys are rejected by name") {
        const auto p = write_config(dir.path, "bad.cfg",
                                    "kind = mse-sweep\nsweep_values = 1\nbogus_key = 3\n");
        try {
            parse_experiment_config(p.string());
            FAIL("expected ConfigError");
        } catch (const ConfigError& e) {
            REQUIRE(std::string(e.what()).find("bogus_key") != std::string::npos);
        }
    }
    SECTION("missing required keys are named") {
        const auto p1 = write_config(dir.path, "nokind.cfg", "sweep_values = 1\n");
        try {
            parse_experiment_config(p1.string());
            FAIL("expected ConfigError");
        } catch (const ConfigError& e) {
            REQUIRE(std::string(e.what()).find("kind") != std::string::npos);
        }
        const auto p2 = write_config(dir.path, "nosweep.cfg", "kind = mse-sweep\n");
        try {
            parse_experiment_config(p2.string());
            FAIL("expected ConfigError");
        } catch (const ConfigError& e) {
            REQUIRE(std::string(e.what()).find("sweep_values") != std::string::npos);
        }
    }
    SECTION("malformed lines and duplicates are rejected") {
        const auto p = write_config(dir.path, "dup.cfg",
                                    "kind = mse-sweep\nkind = ser-sweep\nsweep_values = 1\n");
        REQUIRE_THROWS_AS(parse_experiment_config(p.string()), ConfigError);
        const auto q = write_config(dir.path, "noeq.cfg", "kind mse-sweep\n");
        REQUIRE_THROWS_AS(parse_experiment_config(q.string()), ConfigError);
    }
}

TEST_CASE("experiment runs write a table and a metadata sidecar") {
    TempDir dir;
    const auto p = write_config(dir.path, "psd.cfg", tiny_psd_config);
    RunOverrides overrides;
    overrides.output = (dir.path / "out").string();
    std::ostringstream diag;
    REQUIRE(run(p.string(), overrides, diag) == 0);
    REQUIRE(fs::exists(dir.path / "out.csv"));
    REQUIRE(fs::exists(dir.path / "out.meta.json"));

    const std::string csv = slurp(dir.path / "out.csv");
    REQUIRE(csv.rfind("snr_p_db,branch,k_c,inv_psd,inv_psd_white,dc_iterations,warning", 0) == 0);
    // 2 sweep points x 8 bins + header
    REQUIRE(std::count(csv.begin(), csv.end(), '\n') == 17);

    const auto meta = nlohmann::json::parse(slurp(dir.path / "out.meta.json"));
    REQUIRE(meta["kind"] == "optimize-psd");
    REQUIRE(meta["seed"] == 9);
    REQUIRE(meta["system"]["pilot_len"] == 8);
    REQUIRE(meta["convergence_warning"] == false);
}

TEST_CASE("identical config and seed reproduce the CSV byte for byte") {
    TempDir dir;
    const auto p = write_config(dir.path, "mse.cfg",
                                "kind = mse-sweep\n"
                                "oversampling = 1\n"
                                "pilot_len = 8\n"
                                "data_len = 16\n"
                                "capacity = 2\n"
                                "sweep_variable = snr_p_db\n"
                                "sweep_values = 10, 14\n"
                                "trials = 150\n"
                                "seed = 3\n");
    RunOverrides a, b;
    a.output = (dir.path / "a").string();
    b.output = (dir.path / "b").string();
    b.threads = 2;
    std::ostringstream diag;
    REQUIRE(run(p.string(), a, diag) == 0);
    REQUIRE(run(p.string(), b, diag) == 0);
    REQUIRE(slurp(dir.path / "a.csv") == slurp(dir.path / "b.csv"));
}

TEST_CASE("configuration failures exit with code 2") {
    TempDir dir;
    std::ostringstream diag;
    SECTION("unreadable file") {
        REQUIRE(run((dir.path / "missing.cfg").string(), {}, diag) == 2);
    }
    SECTION("invalid system parameters") {
        const auto p = write_config(dir.path, "bad.cfg",
                                    "kind = mse-sweep\n"
                                    "oversampling = 0\n"
                                    "sweep_values = 10\n");
        REQUIRE(run(p.string(), {}, diag) == 2);
        REQUIRE(diag.str().find("error") != std::string::npos);
    }
}

TEST_CASE("plot scripts match the table layout") {
    TempDir dir;
    SECTION("spectrum tables plot as impulses over the centered axis") {
        const auto p = write_config(dir.path, "psd.cfg", tiny_psd_config);
        RunOverrides overrides;
        overrides.output = (dir.path / "psd").string();
        std::ostringstream diag;
        REQUIRE(run(p.string(), overrides, diag) == 0);
        const std::string script = emit_plot_script((dir.path / "psd.csv").string());
        const std::string body = slurp(script);
        REQUIRE(body.find("impulses") != std::string::npos);
        REQUIRE(body.find("k_c") != std::string::npos);
    }
    SECTION("error-rate tables get a log axis and the reference curves") {
        const auto csv = dir.path / "ser.csv";
        std::ofstream(csv) << "snr_db,ser_opt,se_ser_opt,ser_white,se_ser_white,ser_perfect,"
                              "se_ser_perfect,sigma2_qd\n"
                              "0,0.1,0.01,0.2,0.01,0.05,0.01,0\n";
        const std::string body = slurp(emit_plot_script(csv.string()));
        REQUIRE(body.find("set logscale y") != std::string::npos);
        REQUIRE(body.find("perfect sync") != std::string::npos);
    }
    SECTION("MSE tables get a log axis") {
        const auto csv = dir.path / "mse.csv";
        std::ofstream(csv) << "snr_p_db,mse_tau_opt,se_tau_opt,mse_theta_opt,se_theta_opt,"
                              "mse_tau_white,se_tau_white,mse_theta_white,se_theta_white,"
                              "crb_tau_opt,crb_theta_opt,crb_tau_white,crb_theta_white\n"
                              "0,1,0.1,1,0.1,2,0.1,2,0.1,0.5,0.5,1,1\n";
        const std::string body = slurp(emit_plot_script(csv.string()));
        REQUIRE(body.find("set logscale y") != std::string::npos);
    }
    SECTION("malformed tables are rejected") {
        const auto csv = dir.path / "garbage.csv";
        std::ofstream(csv) << "not a table\n";
        REQUIRE_THROWS(emit_plot_script(csv.string()));
    }
}

TEST_CASE("shipped experiment configs parse and validate") {
    const fs::path config_dir = FRONTSYNC_CONFIG_DIR;
    int found = 0;
    for (const auto& entry : fs::directory_iterator(config_dir)) {
        if (entry.path().extension() != ".cfg") continue;
        ++found;
        INFO(entry.path().string());
        const ExperimentConfig cfg = parse_experiment_config(entry.path().string());
        REQUIRE_FALSE(cfg.sweep_values.empty());
        cfg.system_at(cfg.sweep_values.front()).validate();
    }
    REQUIRE(found >= 7);
}
