#pragma once

#include <stdexcept>
#include <string>

#include "frontsync/common.hpp"

namespace frontsync {

enum class Constellation { bpsk, qpsk };

inline const char* to_string(Constellation c) {
    return c == Constellation::bpsk ? "bpsk" : "qpsk";
}

/// Physical and frame parameters of one uplink configuration.
///
/// Conventions fixed across the library: unnormalized forward DFT, centered
/// frequency indices wherever an index enters a formula multiplicatively,
/// timing offsets in seconds, phase offsets in radians.
struct SystemConfig {
    double amplitude = 0.7;       // channel amplitude A
    double symbol_period = 1.0;   // T, seconds
    int oversampling = 1;         // F
    int pilot_len = 16;           // N_p
    int data_len = 84;            // N_d
    double pilot_energy = 1.0;    // E_xp, power per pilot symbol
    double data_energy = 1.0;     // E_xd, power per data symbol
    double noise_psd = 1.0;       // N0, two-sided
    double capacity = 3.0;        // C, fronthaul bits per uplink sample
    int pulse_truncation = 8;     // L, sidelobes kept in time-domain checks

    double sample_period() const { return symbol_period / oversampling; }
    /// Per-sample noise power during the oversampled training phase, N0/Ts.
    double pilot_noise_power() const { return noise_psd / sample_period(); }
    /// Per-sample noise power during the baud-rate data phase, N0/T.
    double data_noise_power() const { return noise_psd / symbol_period; }

    double snr_p() const { return pilot_energy / pilot_noise_power(); }
    double snr_d() const { return data_energy / data_noise_power(); }

    int frame_len() const { return pilot_len + data_len; }

    /// Derive symbol energies from per-sample SNRs (dB), N0 and T fixed.
    static SystemConfig from_snr_db(double snr_p_db, double snr_d_db, int oversampling,
                                    int pilot_len, int data_len, double amplitude = 0.7,
                                    double capacity = 3.0, double noise_psd = 1.0,
                                    double symbol_period = 1.0) {
        SystemConfig cfg;
        cfg.amplitude = amplitude;
        cfg.symbol_period = symbol_period;
        cfg.oversampling = oversampling;
        cfg.pilot_len = pilot_len;
        cfg.data_len = data_len;
        cfg.noise_psd = noise_psd;
        cfg.capacity = capacity;
        cfg.pilot_energy = db_to_linear(snr_p_db) * cfg.pilot_noise_power();
        cfg.data_energy = db_to_linear(snr_d_db) * cfg.data_noise_power();
        return cfg;
    }

    void validate() const {
        if (!(amplitude > 0)) throw std::invalid_argument("SystemConfig: amplitude must be > 0");
        if (!(symbol_period > 0)) throw std::invalid_argument("SystemConfig: symbol_period must be > 0");
        if (oversampling < 1) throw std::invalid_argument("SystemConfig: oversampling must be >= 1");
        if (pilot_len < 4) throw std::invalid_argument("SystemConfig: pilot_len must be >= 4");
        if (data_len < 1) throw std::invalid_argument("SystemConfig: data_len must be >= 1");
        if (!(pilot_energy > 0)) throw std::invalid_argument("SystemConfig: pilot_energy must be > 0");
        if (!(data_energy > 0)) throw std::invalid_argument("SystemConfig: data_energy must be > 0");
        if (noise_psd < 0) throw std::invalid_argument("SystemConfig: noise_psd must be >= 0");
        if (!(capacity > 0)) throw std::invalid_argument("SystemConfig: capacity must be > 0");
        if (pulse_truncation < 4) throw std::invalid_argument("SystemConfig: pulse_truncation must be >= 4");
    }
};

}  // namespace frontsync
