#pragma once

#include <algorithm>

#include "frontsync/common.hpp"
#include "frontsync/config.hpp"
#include "frontsync/metrics.hpp"
#include "frontsync/rng.hpp"
#include "frontsync/signal_model.hpp"

namespace frontsync {

enum class CompressionModel { gaussian, scalar_uniform };

/// Training-field observations after fronthaul compression. Masked-out bins
/// were not transmitted and must be excluded from downstream estimator sums.
struct CompressedPilotFrame {
    ComplexGrid observations;  // [F][N_p]
    MaskGrid transmitted;      // [F][N_p]
    CompressionModel model = CompressionModel::gaussian;
};

/// Per-frequency scalar uniform quantizer: step 0 marks a dropped bin.
struct ScalarQuantizerSpec {
    RealGrid step;         // Delta[n][k], applied to re/im independently
    RealGrid clip_radius;  // saturation bound per bin
};

/// Additive Gaussian compression model: independent complex Gaussian noise of
/// variance N_p S_Q^n[k] per frequency bin, realizing a circulant time-domain
/// covariance with eigenvalues S_Q^n[k].
inline CompressedPilotFrame apply_gaussian_model(const PilotFrame& frame, const InvPsdGrid& grid,
                                                 std::uint64_t rng_seed) {
    if (grid.u.branches() != frame.observations.branches() ||
        grid.u.bins() != frame.observations.bins())
        throw std::invalid_argument("apply_gaussian_model: grid shape does not match frame");
    RngStream rng(rng_seed);
    CompressedPilotFrame out;
    out.model = CompressionModel::gaussian;
    out.observations = frame.observations;
    out.transmitted = MaskGrid(grid.u.branches(), grid.u.bins(), 0);
    const double np = grid.u.bins();
    for (int n = 0; n < grid.u.branches(); ++n) {
        for (int k = 0; k < grid.u.bins(); ++k) {
            const double u = grid.u(n, k);
            if (!(u > 0.0)) {
                out.observations(n, k) = cdouble(0.0, 0.0);
                continue;
            }
            out.transmitted(n, k) = 1;
            if (!std::isinf(u)) out.observations(n, k) += rng.complex_normal(np / u);
        }
    }
    return out;
}

/// Steps from the target noise PSD via S_q = Delta^2 / 12; clip radius at four
/// standard deviations of the bin's signal-plus-noise amplitude.
inline ScalarQuantizerSpec design_scalar_quantizer(const InvPsdGrid& grid,
                                                   const SystemConfig& cfg) {
    detail::require_grid_shape(cfg, grid, "design_scalar_quantizer");
    const PolyphaseResponse resp = polyphase_response(cfg);
    ScalarQuantizerSpec spec{RealGrid(grid.u.branches(), grid.u.bins()),
                             RealGrid(grid.u.branches(), grid.u.bins())};
    for (int n = 0; n < grid.u.branches(); ++n) {
        for (int k = 0; k < grid.u.bins(); ++k) {
            const double u = grid.u(n, k);
            spec.step(n, k) = u > 0.0 ? std::sqrt(12.0 / u) : 0.0;
            const double bin_power = cfg.pilot_len *
                                     (cfg.pilot_energy * cfg.amplitude * cfg.amplitude *
                                          std::norm(resp.g_freq(n, k)) +
                                      cfg.pilot_noise_power());
            spec.clip_radius(n, k) = 4.0 * std::sqrt(bin_power);
        }
    }
    return spec;
}

namespace detail {
/// Midrise quantization with saturation, per real component.
inline double quantize_component(double x, double step, double clip) {
    x = std::clamp(x, -clip, clip);
    return step * (std::floor(x / step) + 0.5);
}
}  // namespace detail

/// Deterministic per-frequency scalar uniform quantization of a pilot frame.
inline CompressedPilotFrame apply_scalar_quantizer(const PilotFrame& frame,
                                                   const ScalarQuantizerSpec& spec) {
    if (spec.step.branches() != frame.observations.branches() ||
        spec.step.bins() != frame.observations.bins())
        throw std::invalid_argument("apply_scalar_quantizer: spec shape does not match frame");
    CompressedPilotFrame out;
    out.model = CompressionModel::scalar_uniform;
    out.observations = ComplexGrid(spec.step.branches(), spec.step.bins());
    out.transmitted = MaskGrid(spec.step.branches(), spec.step.bins(), 0);
    for (int n = 0; n < spec.step.branches(); ++n) {
        for (int k = 0; k < spec.step.bins(); ++k) {
            const double step = spec.step(n, k);
            if (!(step > 0.0)) continue;
            out.transmitted(n, k) = 1;
            const double clip = spec.clip_radius(n, k);
            const cdouble y = frame.observations(n, k);
            out.observations(n, k) = cdouble(detail::quantize_component(y.real(), step, clip),
                                             detail::quantize_component(y.imag(), step, clip));
        }
    }
    return out;
}

/// White Gaussian compression of the baud-rate data field.
inline DataFrame apply_data_quantizer(const DataFrame& frame, double sigma2_qd,
                                      std::uint64_t rng_seed) {
    if (sigma2_qd < 0.0) throw std::invalid_argument("apply_data_quantizer: sigma2_qd must be >= 0");
    DataFrame out = frame;
    if (sigma2_qd == 0.0) return out;
    RngStream rng(rng_seed);
    for (auto& y : out.observations) y += rng.complex_normal(sigma2_qd);
    return out;
}

/// Diagnostic fronthaul bill of a scalar quantizer, bits per pilot frame:
/// log2(#levels) for each of the two real components of every kept bin.
inline double scalar_quantizer_bits(const ScalarQuantizerSpec& spec) {
    double bits = 0.0;
    for (int n = 0; n < spec.step.branches(); ++n) {
        for (int k = 0; k < spec.step.bins(); ++k) {
            const double step = spec.step(n, k);
            if (!(step > 0.0)) continue;
            const double levels = std::max(2.0, std::ceil(2.0 * spec.clip_radius(n, k) / step));
            bits += 2.0 * std::log2(levels);
        }
    }
    return bits;
}

}  // namespace frontsync
