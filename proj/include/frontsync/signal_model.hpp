#pragma once

#include <vector>

#include "frontsync/common.hpp"
#include "frontsync/config.hpp"
#include "frontsync/dft.hpp"
#include "frontsync/rng.hpp"

namespace frontsync {

/// Frequency response G^n[k] of the n-th polyphase branch at zero offsets.
/// Unit magnitude on every bin for the zero-excess-bandwidth pulse.
struct PolyphaseResponse {
    ComplexGrid g_freq;  // [F][N_p]
};

struct PilotFrame {
    std::vector<cdouble> pilots;  // known sequence x_p, length N_p
    ComplexGrid observations;     // Y^n[k], frequency domain, [F][N_p]
    double true_tau = 0.0;        // seconds
    double true_theta = 0.0;      // radians
};

struct DataFrame {
    std::vector<cdouble> symbols;       // length N_d, constellation points
    std::vector<cdouble> observations;  // baud-rate time domain, length N_d
    double true_tau = 0.0;
    double true_theta = 0.0;
};

/// Zero-excess-bandwidth pulse g(t) = sinc(t/T).
inline double pulse_value(double t, const SystemConfig& cfg) {
    return sinc(t / cfg.symbol_period);
}

/// G^n[k] = exp(+j 2 pi k_c n / (N_p F)): the fractional advance of branch n.
inline PolyphaseResponse polyphase_response(const SystemConfig& cfg) {
    if (cfg.oversampling < 1) throw std::invalid_argument("polyphase_response: F must be >= 1");
    PolyphaseResponse resp{ComplexGrid(cfg.oversampling, cfg.pilot_len)};
    for (int n = 0; n < cfg.oversampling; ++n) {
        for (int k = 0; k < cfg.pilot_len; ++k) {
            const double kc = centered_index(k, cfg.pilot_len);
            const double ang = 2.0 * pi * kc * n / (static_cast<double>(cfg.pilot_len) * cfg.oversampling);
            resp.g_freq(n, k) = cdouble(std::cos(ang), std::sin(ang));
        }
    }
    return resp;
}

/// Phase factor of a circular fractional delay by tau seconds on bin k of an
/// N-point baud-rate DFT: exp(-j 2 pi k_c (tau/T) / N).
inline cdouble delay_phase(double tau, int k, int n_bins, const SystemConfig& cfg) {
    const double kc = centered_index(k, n_bins);
    const double ang = -2.0 * pi * kc * (tau / cfg.symbol_period) / n_bins;
    return {std::cos(ang), std::sin(ang)};
}

namespace detail {
inline void require_residual_offset(double tau, const SystemConfig& cfg, const char* who) {
    if (!(std::abs(tau) < cfg.symbol_period / 2.0))
        throw std::domain_error(std::string(who) + ": |tau| must be < T/2");
}
}  // namespace detail

/// Exact frequency-domain synthesis of the training field under the circular
/// (cyclic-prefix) model:
///   Y^n[k] = A X_p[k] G^n[k] e^{j theta} e^{-j 2 pi k_c (tau/T)/N_p} + Z^n[k],
/// with Z^n[k] i.i.d. complex Gaussian of variance N_p N0/T_s.
inline PilotFrame synthesize_pilot_frame(const SystemConfig& cfg, double tau, double theta,
                                         std::uint64_t rng_seed) {
    cfg.validate();
    detail::require_residual_offset(tau, cfg, "synthesize_pilot_frame");
    RngStream rng(rng_seed);

    PilotFrame frame;
    frame.true_tau = tau;
    frame.true_theta = theta;
    frame.pilots.resize(cfg.pilot_len);
    for (auto& p : frame.pilots) p = rng.complex_normal(cfg.pilot_energy);

    const std::vector<cdouble> x_freq = dft(frame.pilots);
    const PolyphaseResponse resp = polyphase_response(cfg);
    const cdouble rot(std::cos(theta), std::sin(theta));
    const double z_var = cfg.pilot_len * cfg.pilot_noise_power();

    frame.observations = ComplexGrid(cfg.oversampling, cfg.pilot_len);
    for (int n = 0; n < cfg.oversampling; ++n) {
        for (int k = 0; k < cfg.pilot_len; ++k) {
            cdouble y = cfg.amplitude * x_freq[k] * resp.g_freq(n, k) * rot *
                        delay_phase(tau, k, cfg.pilot_len, cfg);
            if (z_var > 0) y += rng.complex_normal(z_var);
            frame.observations(n, k) = y;
        }
    }
    return frame;
}

/// Constellation points with per-symbol power `energy`.
inline std::vector<cdouble> constellation_points(Constellation c, double energy) {
    const double a = std::sqrt(energy);
    switch (c) {
        case Constellation::bpsk:
            return {cdouble(a, 0.0), cdouble(-a, 0.0)};
        case Constellation::qpsk: {
            const double h = a / std::sqrt(2.0);
            return {cdouble(h, h), cdouble(-h, h), cdouble(-h, -h), cdouble(h, -h)};
        }
    }
    throw std::invalid_argument("constellation_points: unsupported constellation");
}

/// Index of the nearest constellation point.
inline std::size_t detect_symbol(cdouble z, const std::vector<cdouble>& points) {
    std::size_t best = 0;
    double best_d = std::norm(z - points[0]);
    for (std::size_t i = 1; i < points.size(); ++i) {
        const double d = std::norm(z - points[i]);
        if (d < best_d) {
            best_d = d;
            best = i;
        }
    }
    return best;
}

/// Circular fractional delay applied in the frequency domain.
inline std::vector<cdouble> fractional_delay(const std::vector<cdouble>& x, double tau,
                                             const SystemConfig& cfg) {
    std::vector<cdouble> freq = dft(x);
    const int n = static_cast<int>(x.size());
    for (int k = 0; k < n; ++k) freq[k] *= delay_phase(tau, k, n, cfg);
    return idft(freq);
}

/// Baud-rate data field: circular fractional delay of the symbol sequence,
/// scaled by A e^{j theta}, plus i.i.d. noise of per-sample variance N0/T.
inline DataFrame synthesize_data_frame(const SystemConfig& cfg, double tau, double theta,
                                       Constellation constellation, std::uint64_t rng_seed) {
    cfg.validate();
    detail::require_residual_offset(tau, cfg, "synthesize_data_frame");
    RngStream rng(rng_seed);

    const std::vector<cdouble> points = constellation_points(constellation, cfg.data_energy);
    DataFrame frame;
    frame.true_tau = tau;
    frame.true_theta = theta;
    frame.symbols.resize(cfg.data_len);
    for (auto& s : frame.symbols) s = points[rng.bits() % points.size()];

    frame.observations = fractional_delay(frame.symbols, tau, cfg);
    const cdouble rot(std::cos(theta), std::sin(theta));
    const double z_var = cfg.data_noise_power();
    for (auto& y : frame.observations) {
        y *= cfg.amplitude * rot;
        if (z_var > 0) y += rng.complex_normal(z_var);
    }
    return frame;
}

}  // namespace frontsync
