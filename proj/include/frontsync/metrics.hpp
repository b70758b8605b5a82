#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include "frontsync/common.hpp"
#include "frontsync/config.hpp"
#include "frontsync/signal_model.hpp"

namespace frontsync {

/// Inverse quantization-noise PSD u[n][k] = 1/S_Q^n[k].
/// u = 0 encodes S = infinity: the bin is dropped (not transmitted, zero
/// fronthaul bits); u = +inf encodes no quantization at all.
struct InvPsdGrid {
    RealGrid u;
    double sigma2_qd = 0.0;  // data-phase quantization noise variance

    bool transmitted(int n, int k) const { return u(n, k) > 0.0; }

    static InvPsdGrid uniform(const SystemConfig& cfg, double value) {
        return {RealGrid(cfg.oversampling, cfg.pilot_len, value), 0.0};
    }
    static InvPsdGrid unquantized(const SystemConfig& cfg) { return uniform(cfg, inf); }
};

struct CrbPair {
    double crb_tau = 0.0;    // seconds^2
    double crb_theta = 0.0;  // radians^2
};

/// Piecewise-linear pulse-approximation coefficients.
struct LinearApproxCoeffs {
    double delta_tau_max = 0.0;    // seconds
    double delta_theta_max = 0.0;  // radians
    double eta = 0.0;
    double c1 = 0.0, c2 = 0.0, c3 = 0.0, c4 = 0.0, c5 = 0.0;
    double a_bar = 0.0;  // sum of squared off-center slopes
};

namespace detail {
inline void require_grid_shape(const SystemConfig& cfg, const InvPsdGrid& grid, const char* who) {
    if (grid.u.branches() != cfg.oversampling || grid.u.bins() != cfg.pilot_len)
        throw std::invalid_argument(std::string(who) + ": grid shape does not match config");
}

/// 1/(N0/Ts + S_Q) expressed through u so dropped bins stay finite.
inline double crb_weight(double u, double noise_power) {
    if (u == 0.0) return 0.0;
    if (std::isinf(u)) return 1.0 / noise_power;
    return u / (1.0 + noise_power * u);
}
}  // namespace detail

/// Fronthaul rate of the training field in bits (Szego eigenvalue form):
/// sum over branches and bins of log2(1 + (E_xp A^2 |G|^2 + N0/Ts) u).
inline double pilot_rate(const SystemConfig& cfg, const InvPsdGrid& grid) {
    detail::require_grid_shape(cfg, grid, "pilot_rate");
    const PolyphaseResponse resp = polyphase_response(cfg);
    const double noise = cfg.pilot_noise_power();
    double bits = 0.0;
    for (int n = 0; n < cfg.oversampling; ++n) {
        for (int k = 0; k < cfg.pilot_len; ++k) {
            const double u = grid.u(n, k);
            if (u == 0.0) continue;
            const double psd = cfg.pilot_energy * cfg.amplitude * cfg.amplitude *
                                   std::norm(resp.g_freq(n, k)) +
                               noise;
            bits += std::log2(1.0 + psd * u);
        }
    }
    return bits;
}

/// Log-det oracle for pilot_rate: builds the circulant covariance matrices of
/// signal and quantization noise explicitly from their PSDs and evaluates
/// sum_n log2 det(K_y + K_q) / det(K_q) by Cholesky factorization.
inline double pilot_rate_logdet(const SystemConfig& cfg, const InvPsdGrid& grid) {
    detail::require_grid_shape(cfg, grid, "pilot_rate_logdet");
    const int np = cfg.pilot_len;
    const PolyphaseResponse resp = polyphase_response(cfg);
    const double noise = cfg.pilot_noise_power();

    using Mat = Eigen::Matrix<cdouble, Eigen::Dynamic, Eigen::Dynamic>;
    const auto circulant_from_psd = [np](const std::vector<double>& psd) {
        // first row by inverse DFT of the eigenvalues, then wrap-around fill
        std::vector<cdouble> eig(psd.begin(), psd.end());
        const std::vector<cdouble> row = idft(eig);
        Mat m(np, np);
        for (int i = 0; i < np; ++i)
            for (int j = 0; j < np; ++j) m(i, j) = row[(j - i + np) % np];
        return m;
    };
    const auto logdet = [](const Mat& m) {
        const Eigen::LLT<Mat> llt(m);
        if (llt.info() != Eigen::Success)
            throw std::domain_error("pilot_rate_logdet: covariance not positive definite");
        double acc = 0.0;
        for (int i = 0; i < m.rows(); ++i) acc += std::log(std::real(llt.matrixLLT()(i, i)));
        return 2.0 * acc;
    };

    double bits = 0.0;
    for (int n = 0; n < cfg.oversampling; ++n) {
        std::vector<double> s_y(np), s_q(np);
        for (int k = 0; k < np; ++k) {
            const double u = grid.u(n, k);
            if (!(u > 0.0) || std::isinf(u))
                throw std::domain_error("pilot_rate_logdet: requires finite positive u on every bin");
            s_q[k] = 1.0 / u;
            s_y[k] = cfg.pilot_energy * cfg.amplitude * cfg.amplitude *
                         std::norm(resp.g_freq(n, k)) +
                     noise;
        }
        const Mat kq = circulant_from_psd(s_q);
        std::vector<double> s_sum(np);
        for (int k = 0; k < np; ++k) s_sum[k] = s_y[k] + s_q[k];
        const Mat ksum = circulant_from_psd(s_sum);
        bits += (logdet(ksum) - logdet(kq)) / std::log(2.0);
    }
    return bits;
}

/// Fronthaul rate of the data field in bits for white quantization noise of
/// variance sigma2_qd, flat baud-rate response.
inline double data_rate(const SystemConfig& cfg, double sigma2_qd) {
    if (!(sigma2_qd > 0.0)) throw std::invalid_argument("data_rate: sigma2_qd must be > 0");
    const double psd = cfg.data_energy * cfg.amplitude * cfg.amplitude + cfg.noise_psd;
    return cfg.data_len * std::log2(1.0 + psd / sigma2_qd);
}

/// Estimation-theoretic bounds on timing and phase MSE for a given
/// quantization-noise spectrum. Dropped bins contribute nothing.
inline CrbPair crb(const SystemConfig& cfg, const InvPsdGrid& grid) {
    detail::require_grid_shape(cfg, grid, "crb");
    const PolyphaseResponse resp = polyphase_response(cfg);
    const double noise = cfg.pilot_noise_power();
    const double slope = 2.0 * pi / (cfg.pilot_len * cfg.sample_period());

    double fisher_theta = 0.0;
    double fisher_tau = 0.0;
    for (int n = 0; n < cfg.oversampling; ++n) {
        for (int k = 0; k < cfg.pilot_len; ++k) {
            const double w = detail::crb_weight(grid.u(n, k), noise);
            if (w == 0.0) continue;
            const double kc = centered_index(k, cfg.pilot_len);
            const double b = cfg.pilot_energy * cfg.amplitude * cfg.amplitude *
                             std::norm(resp.g_freq(n, k));
            fisher_theta += b * w;
            fisher_tau += kc * kc * b * w;
        }
    }
    fisher_tau *= slope * slope;
    if (!(fisher_theta > 0.0))
        throw std::domain_error("crb: no transmitted bins, phase CRB is infinite");
    if (!(fisher_tau > 0.0))
        throw std::domain_error("crb: no transmitted bins with nonzero centered index, timing CRB is infinite");
    return {1.0 / fisher_tau, 1.0 / fisher_theta};
}

/// Slopes of the piecewise-linear pulse approximation over the residual
/// timing range [-dtau_max/2, dtau_max/2].
inline LinearApproxCoeffs linear_approx_coeffs(double delta_tau_max, double delta_theta_max,
                                               const SystemConfig& cfg) {
    const double T = cfg.symbol_period;
    if (!(delta_tau_max > 0.0) || !(delta_tau_max < T))
        throw std::domain_error("linear_approx_coeffs: requires 0 < delta_tau_max < T");
    const double s = delta_tau_max / (2.0 * T);

    LinearApproxCoeffs c;
    c.delta_tau_max = delta_tau_max;
    c.delta_theta_max = delta_theta_max;
    c.eta = (1.0 - sinc(s)) / s;
    c.c1 = sinc(1.0 - s) / s;
    c.c2 = std::abs(sinc(1.0 + s)) / s;
    c.c3 = std::abs(sinc(2.0 - s)) / s;
    c.c4 = sinc(2.0 + s) / s;
    c.c5 = sinc(3.0 - s) / s;
    c.a_bar = c.c1 * c.c1 + c.c2 * c.c2 + c.c3 * c.c3 + c.c4 * c.c4 + c.c5 * c.c5;
    return c;
}

struct ErrorTermPowers {
    double p_signal = 0.0;
    double p_phase_noise = 0.0;
    double p_isi = 0.0;
};

/// Closed-form powers of the post-compensation signal, phase-error noise and
/// timing-error ISI under the linear pulse approximation.
inline ErrorTermPowers error_term_powers(const SystemConfig& cfg, const CrbPair& crbs,
                                         const LinearApproxCoeffs& coeffs) {
    const double a2e = cfg.amplitude * cfg.amplitude * cfg.data_energy;
    const double T = cfg.symbol_period;
    const double shrink = 1.0 - coeffs.eta / (2.0 * T) * std::sqrt(12.0 * crbs.crb_tau);
    return {a2e * shrink, a2e * crbs.crb_theta * shrink,
            a2e * coeffs.a_bar / (T * T) * crbs.crb_tau};
}

/// Post-compensation effective SNR including residual-synchronization noise:
/// A^2 E_xd / (A^2 E_xd CRB_theta + (A^2 E_xd a_bar / T^2) CRB_tau + N0/T + sigma2_qd).
inline double effective_snr(const SystemConfig& cfg, const CrbPair& crbs,
                            const LinearApproxCoeffs& coeffs, double sigma2_qd) {
    const double a2e = cfg.amplitude * cfg.amplitude * cfg.data_energy;
    const double T = cfg.symbol_period;
    const double denom = a2e * crbs.crb_theta + a2e * coeffs.a_bar / (T * T) * crbs.crb_tau +
                         cfg.data_noise_power() + sigma2_qd;
    return a2e / denom;
}

}  // namespace frontsync
