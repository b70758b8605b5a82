#pragma once

#include <algorithm>
#include <atomic>
#include <thread>
#include <vector>

#include "frontsync/common.hpp"
#include "frontsync/config.hpp"
#include "frontsync/metrics.hpp"
#include "frontsync/quantizer.hpp"
#include "frontsync/rng.hpp"
#include "frontsync/signal_model.hpp"

namespace frontsync {

struct EstimationResult {
    double tau_hat = 0.0;    // seconds, in [-T/2, T/2]
    double theta_hat = 0.0;  // radians, wrapped to [-pi, pi)
    double objective = 0.0;  // final residual sum
};

/// Monte Carlo aggregates with standard errors of the mean.
struct TrialStats {
    double mse_tau = 0.0;
    double mse_theta = 0.0;
    double se_mse_tau = 0.0;
    double se_mse_theta = 0.0;
    double ser = 0.0;
    double se_ser = 0.0;
    long n_trials = 0;
    std::uint64_t seed = 0;
};

namespace detail {

/// Deterministic parallel map over trial indices; results land in
/// caller-provided storage indexed by trial, so aggregation order is fixed.
template <typename Fn>
void run_trials(long n_trials, int threads, Fn&& fn) {
    if (threads <= 0) threads = static_cast<int>(std::thread::hardware_concurrency());
    if (threads <= 1 || n_trials < 2 * threads) {
        for (long t = 0; t < n_trials; ++t) fn(t);
        return;
    }
    std::atomic<long> next{0};
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(threads);
    pool.reserve(threads);
    for (int w = 0; w < threads; ++w) {
        pool.emplace_back([&, w] {
            try {
                for (;;) {
                    const long t = next.fetch_add(1);
                    if (t >= n_trials) return;
                    fn(t);
                }
            } catch (...) {
                errors[w] = std::current_exception();
            }
        });
    }
    for (auto& th : pool) th.join();
    for (const auto& e : errors)
        if (e) std::rethrow_exception(e);
}

/// Compensated (Kahan) mean and standard error over values in index order.
struct MeanWithError {
    double mean = 0.0;
    double se = 0.0;
};

inline MeanWithError reduce_mean(const std::vector<double>& values) {
    double sum = 0.0, comp = 0.0;
    for (double v : values) {
        const double y = v - comp;
        const double t = sum + y;
        comp = (t - sum) - y;
        sum = t;
    }
    const double n = static_cast<double>(values.size());
    const double mean = sum / n;
    double var = 0.0, comp2 = 0.0;
    for (double v : values) {
        const double d = (v - mean) * (v - mean) - comp2;
        const double t = var + d;
        comp2 = (t - var) - d;
        var = t;
    }
    var /= std::max(1.0, n - 1.0);
    return {mean, std::sqrt(var / n)};
}

struct PhaseSamples {
    std::vector<double> base;       // measured phase minus branch offset, cycles
    std::vector<double> slope;      // k_c / N_p
    int distinct_kc = 0;
};

inline PhaseSamples phase_samples(const CompressedPilotFrame& compressed,
                                  const std::vector<cdouble>& pilots, const SystemConfig& cfg) {
    const std::vector<cdouble> x_freq = dft(pilots);
    PhaseSamples ps;
    std::vector<int> seen_kc;
    for (int n = 0; n < compressed.observations.branches(); ++n) {
        for (int k = 0; k < compressed.observations.bins(); ++k) {
            if (!compressed.transmitted(n, k)) continue;
            const int kc = centered_index(k, cfg.pilot_len);
            const double r =
                std::arg(compressed.observations(n, k) * std::conj(x_freq[k])) / (2.0 * pi);
            const double slope = static_cast<double>(kc) / cfg.pilot_len;
            ps.base.push_back(r - slope * (static_cast<double>(n) / cfg.oversampling));
            ps.slope.push_back(slope);
            if (std::find(seen_kc.begin(), seen_kc.end(), kc) == seen_kc.end())
                seen_kc.push_back(kc);
        }
    }
    ps.distinct_kc = static_cast<int>(seen_kc.size());
    return ps;
}

}  // namespace detail

/// Least-squares joint phase/timing estimator on wrapped per-bin phases:
/// minimizes sum |wrap(r - theta/2pi + (k_c/N_p)(tau/T - n/F))|^2 by a 64x64
/// grid search followed by two rounds of coordinate parabolic refinement.
inline EstimationResult estimate_offsets(const CompressedPilotFrame& compressed,
                                         const std::vector<cdouble>& pilots,
                                         const SystemConfig& cfg) {
    const detail::PhaseSamples ps = detail::phase_samples(compressed, pilots, cfg);
    if (ps.distinct_kc < 2)
        throw std::runtime_error("estimate_offsets: need at least 2 transmitted bins with distinct k_c");

    const double T = cfg.symbol_period;
    const std::size_t nb = ps.base.size();
    const auto phi = [&](double tau, double theta) {
        const double tau_n = tau / T;
        const double th_n = theta / (2.0 * pi);
        double acc = 0.0;
        for (std::size_t i = 0; i < nb; ++i) {
            const double resid = wrap_unit(ps.base[i] + ps.slope[i] * tau_n - th_n);
            acc += resid * resid;
        }
        return acc;
    };

    constexpr int grid_n = 64;
    const double tau_step = T / (grid_n - 1);
    const double theta_step = 2.0 * pi / grid_n;
    double best_tau = 0.0, best_theta = 0.0, best_phi = inf;
    std::vector<double> shifted(nb);
    for (int j = 0; j < grid_n; ++j) {
        const double tau = -T / 2.0 + j * tau_step;
        for (std::size_t i = 0; i < nb; ++i) shifted[i] = ps.base[i] + ps.slope[i] * (tau / T);
        for (int i = 0; i < grid_n; ++i) {
            const double theta = -pi + i * theta_step;
            const double th_n = theta / (2.0 * pi);
            double acc = 0.0;
            for (std::size_t m = 0; m < nb; ++m) {
                const double resid = wrap_unit(shifted[m] - th_n);
                acc += resid * resid;
            }
            if (acc < best_phi) {
                best_phi = acc;
                best_tau = tau;
                best_theta = theta;
            }
        }
    }

    // Coordinate parabolic refinement; the LS surface is locally quadratic.
    double h_tau = tau_step, h_theta = theta_step;
    for (int round = 0; round < 2; ++round) {
        {
            const double f0 = phi(best_tau, best_theta);
            const double fm = phi(best_tau - h_tau, best_theta);
            const double fp = phi(best_tau + h_tau, best_theta);
            const double den = fm - 2.0 * f0 + fp;
            if (den > 0.0) {
                const double d = std::clamp((fm - fp) / (2.0 * den), -1.0, 1.0);
                best_tau += d * h_tau;
            }
        }
        {
            const double f0 = phi(best_tau, best_theta);
            const double fm = phi(best_tau, best_theta - h_theta);
            const double fp = phi(best_tau, best_theta + h_theta);
            const double den = fm - 2.0 * f0 + fp;
            if (den > 0.0) {
                const double d = std::clamp((fm - fp) / (2.0 * den), -1.0, 1.0);
                best_theta += d * h_theta;
            }
        }
        h_tau *= 0.1;
        h_theta *= 0.1;
    }

    EstimationResult est;
    est.tau_hat = std::clamp(best_tau, -T / 2.0, T / 2.0);
    est.theta_hat = wrap_pi(best_theta);
    est.objective = phi(est.tau_hat, est.theta_hat);
    return est;
}

/// Undo the estimated offsets on the data field and slice to the nearest
/// A-scaled constellation point. Returns the detected symbols.
inline std::vector<cdouble> compensate_and_detect(const DataFrame& data,
                                                  const EstimationResult& est,
                                                  const SystemConfig& cfg,
                                                  Constellation constellation) {
    std::vector<cdouble> freq = dft(data.observations);
    const int n = static_cast<int>(freq.size());
    for (int k = 0; k < n; ++k) freq[k] *= delay_phase(-est.tau_hat, k, n, cfg);
    std::vector<cdouble> comp = idft(freq);
    const cdouble derot(std::cos(-est.theta_hat), std::sin(-est.theta_hat));
    const std::vector<cdouble> points = constellation_points(constellation, cfg.data_energy);
    std::vector<cdouble> scaled(points.size());
    for (std::size_t i = 0; i < points.size(); ++i) scaled[i] = cfg.amplitude * points[i];

    std::vector<cdouble> detected(comp.size());
    for (std::size_t m = 0; m < comp.size(); ++m)
        detected[m] = points[detect_symbol(comp[m] * derot, scaled)];
    return detected;
}

inline long symbol_error_count(const std::vector<cdouble>& sent,
                               const std::vector<cdouble>& detected, Constellation constellation,
                               const SystemConfig& cfg) {
    const std::vector<cdouble> points = constellation_points(constellation, cfg.data_energy);
    long errors = 0;
    for (std::size_t m = 0; m < sent.size(); ++m)
        if (detect_symbol(sent[m], points) != detect_symbol(detected[m], points)) ++errors;
    return errors;
}

/// MSE of the joint estimator over random offsets, pilots and noise.
/// Offsets drawn per trial: tau ~ U[-T/4, T/4], theta ~ U[-pi/2, pi/2).
inline TrialStats run_mse_experiment(const SystemConfig& cfg, const InvPsdGrid& grid,
                                     CompressionModel model, long n_trials, std::uint64_t seed,
                                     int threads = 0) {
    if (n_trials < 100) throw std::invalid_argument("run_mse_experiment: n_trials must be >= 100");
    const ScalarQuantizerSpec spec = model == CompressionModel::scalar_uniform
                                         ? design_scalar_quantizer(grid, cfg)
                                         : ScalarQuantizerSpec{};
    std::vector<double> err_tau(n_trials), err_theta(n_trials);
    detail::run_trials(n_trials, threads, [&](long t) {
        RngStream rng = RngStream::derive(seed, static_cast<std::uint64_t>(t));
        const double tau = rng.uniform(-cfg.symbol_period / 4.0, cfg.symbol_period / 4.0);
        const double theta = rng.uniform(-pi / 2.0, pi / 2.0);
        const std::uint64_t pilot_seed = rng.bits();
        const std::uint64_t quant_seed = rng.bits();
        const PilotFrame frame = synthesize_pilot_frame(cfg, tau, theta, pilot_seed);
        const CompressedPilotFrame compressed =
            model == CompressionModel::gaussian ? apply_gaussian_model(frame, grid, quant_seed)
                                                : apply_scalar_quantizer(frame, spec);
        const EstimationResult est = estimate_offsets(compressed, frame.pilots, cfg);
        err_tau[t] = (est.tau_hat - tau) * (est.tau_hat - tau);
        const double dth = wrap_pi(est.theta_hat - theta);
        err_theta[t] = dth * dth;
    });

    TrialStats stats;
    stats.n_trials = n_trials;
    stats.seed = seed;
    const auto mt = detail::reduce_mean(err_tau);
    const auto mh = detail::reduce_mean(err_theta);
    stats.mse_tau = mt.mean;
    stats.se_mse_tau = mt.se;
    stats.mse_theta = mh.mean;
    stats.se_mse_theta = mh.se;
    return stats;
}

struct SerOptions {
    CompressionModel pilot_model = CompressionModel::gaussian;
    bool perfect_sync = false;  // bypass the estimator (genie reference)
    int threads = 0;
};

/// Full pilot-to-detection pipeline; SER aggregated over all data symbols.
inline TrialStats run_ser_experiment(const SystemConfig& cfg, const InvPsdGrid& grid,
                                     double sigma2_qd, Constellation constellation, long n_trials,
                                     std::uint64_t seed, const SerOptions& opts = {}) {
    if (n_trials < 1) throw std::invalid_argument("run_ser_experiment: n_trials must be >= 1");
    const ScalarQuantizerSpec spec = opts.pilot_model == CompressionModel::scalar_uniform
                                         ? design_scalar_quantizer(grid, cfg)
                                         : ScalarQuantizerSpec{};
    std::vector<double> frame_ser(n_trials), err_tau(n_trials), err_theta(n_trials);
    detail::run_trials(n_trials, opts.threads, [&](long t) {
        RngStream rng = RngStream::derive(seed, static_cast<std::uint64_t>(t));
        const double tau = rng.uniform(-cfg.symbol_period / 4.0, cfg.symbol_period / 4.0);
        const double theta = rng.uniform(-pi / 2.0, pi / 2.0);
        const std::uint64_t pilot_seed = rng.bits();
        const std::uint64_t quant_seed = rng.bits();
        const std::uint64_t data_seed = rng.bits();
        const std::uint64_t dquant_seed = rng.bits();

        EstimationResult est;
        if (opts.perfect_sync) {
            est.tau_hat = tau;
            est.theta_hat = theta;
        } else {
            const PilotFrame frame = synthesize_pilot_frame(cfg, tau, theta, pilot_seed);
            const CompressedPilotFrame compressed =
                opts.pilot_model == CompressionModel::gaussian
                    ? apply_gaussian_model(frame, grid, quant_seed)
                    : apply_scalar_quantizer(frame, spec);
            est = estimate_offsets(compressed, frame.pilots, cfg);
        }
        const DataFrame data = synthesize_data_frame(cfg, tau, theta, constellation, data_seed);
        const DataFrame quantized = apply_data_quantizer(data, sigma2_qd, dquant_seed);
        const std::vector<cdouble> detected =
            compensate_and_detect(quantized, est, cfg, constellation);
        frame_ser[t] = static_cast<double>(
                           symbol_error_count(data.symbols, detected, constellation, cfg)) /
                       cfg.data_len;
        err_tau[t] = (est.tau_hat - tau) * (est.tau_hat - tau);
        const double dth = wrap_pi(est.theta_hat - theta);
        err_theta[t] = dth * dth;
    });

    TrialStats stats;
    stats.n_trials = n_trials;
    stats.seed = seed;
    const auto ms = detail::reduce_mean(frame_ser);
    stats.ser = ms.mean;
    stats.se_ser = ms.se;
    const auto mt = detail::reduce_mean(err_tau);
    const auto mh = detail::reduce_mean(err_theta);
    stats.mse_tau = mt.mean;
    stats.se_mse_tau = mt.se;
    stats.mse_theta = mh.mean;
    stats.se_mse_theta = mh.se;
    return stats;
}

/// Empirical powers of the post-compensation signal/phase/ISI terms with the
/// exact pulse, for residual offsets uniform on the stated ranges.
inline ErrorTermPowers measure_error_term_powers(const SystemConfig& cfg, double delta_tau_max,
                                                 double delta_theta_max, long n_trials,
                                                 std::uint64_t seed) {
    if (!(delta_tau_max < 0.5 * cfg.symbol_period))
        throw std::domain_error("measure_error_term_powers: delta_tau_max must be < T/2");
    RngStream rng(seed);
    const std::vector<cdouble> points = constellation_points(Constellation::qpsk, cfg.data_energy);
    const double T = cfg.symbol_period;
    double p_sig = 0.0, p_phase = 0.0, p_isi = 0.0;
    for (long t = 0; t < n_trials; ++t) {
        const double dtau = delta_tau_max > 0.0
                                ? rng.uniform(-delta_tau_max / 2.0, delta_tau_max / 2.0)
                                : 0.0;
        const double dtheta = delta_theta_max > 0.0
                                  ? rng.uniform(-delta_theta_max / 2.0, delta_theta_max / 2.0)
                                  : 0.0;
        cdouble window[7];
        for (auto& w : window) w = points[rng.bits() % points.size()];
        const cdouble rot(std::cos(dtheta), std::sin(dtheta));

        const double g0 = pulse_value(dtau, cfg);
        const cdouble s_d = cfg.amplitude * window[3] * g0;
        const cdouble z_s = s_d * (rot - 1.0);
        cdouble z_isi(0.0, 0.0);
        for (int i = -3; i <= 3; ++i) {
            if (i == 0) continue;
            z_isi += window[3 + i] * pulse_value(-i * T + dtau, cfg);
        }
        z_isi *= cfg.amplitude * rot;

        p_sig += std::norm(s_d);
        p_phase += std::norm(z_s);
        p_isi += std::norm(z_isi);
    }
    const double n = static_cast<double>(n_trials);
    return {p_sig / n, p_phase / n, p_isi / n};
}

}  // namespace frontsync
