#include <catch2/catch_amalgamated.hpp>

#include "frontsync/quantizer.hpp"

using namespace frontsync;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

SystemConfig small_config(int oversampling = 1, int pilot_len = 16) {
    SystemConfig cfg;
    cfg.amplitude = 0.7;
    cfg.oversampling = oversampling;
    cfg.pilot_len = pilot_len;
    cfg.data_len = 64;
    cfg.pilot_energy = 1.0;
    cfg.data_energy = 1.0;
    cfg.noise_psd = 0.1;
    return cfg;
}

}  // namespace

TEST_CASE("additive Gaussian compression model") {
    const SystemConfig cfg = small_config();
    const PilotFrame frame = synthesize_pilot_frame(cfg, 0.05, 0.4, 2);
    SECTION("no quantization noise passes the frame through") {
        const auto out = apply_gaussian_model(frame, InvPsdGrid::unquantized(cfg), 3);
        for (int k = 0; k < cfg.pilot_len; ++k) {
            REQUIRE(out.transmitted(0, k) == 1);
            REQUIRE(out.observations(0, k) == frame.observations(0, k));
        }
    }
    SECTION("all bins dropped leaves nothing") {
        const auto out = apply_gaussian_model(frame, InvPsdGrid::uniform(cfg, 0.0), 3);
        for (int k = 0; k < cfg.pilot_len; ++k) REQUIRE(out.transmitted(0, k) == 0);
    }
    SECTION("per-bin noise variance is N_p S_Q") {
        const double s_q = 0.37;
        const InvPsdGrid grid = InvPsdGrid::uniform(cfg, 1.0 / s_q);
        double acc = 0.0;
        long count = 0;
        for (int rep = 0; rep < 700; ++rep) {
            const auto out = apply_gaussian_model(frame, grid, 100 + rep);
            for (int k = 0; k < cfg.pilot_len; ++k) {
                acc += std::norm(out.observations(0, k) - frame.observations(0, k));
                ++count;
            }
        }
        REQUIRE(count >= 10000);
        REQUIRE_THAT(acc / count, WithinRel(cfg.pilot_len * s_q, 0.03));
    }
}

TEST_CASE("gaussian-model noise realizes the target circulant covariance") {
    SystemConfig cfg = small_config(1, 8);
    const PilotFrame frame = synthesize_pilot_frame(cfg, 0.0, 0.0, 5);
    InvPsdGrid grid = InvPsdGrid::uniform(cfg, 0.0);
    std::vector<double> s_q = {0.2, 0.4, 0.9, 1.5, 2.0, 1.5, 0.9, 0.4};
    for (int k = 0; k < 8; ++k) grid.u(0, k) = 1.0 / s_q[k];

    const int n_trials = 20000;
    std::vector<std::vector<cdouble>> cov(8, std::vector<cdouble>(8, cdouble(0.0, 0.0)));
    for (int t = 0; t < n_trials; ++t) {
        const auto out = apply_gaussian_model(frame, grid, 5000 + t);
        std::vector<cdouble> noise_freq(8);
        for (int k = 0; k < 8; ++k)
            noise_freq[k] = out.observations(0, k) - frame.observations(0, k);
        const auto noise_time = idft(noise_freq);
        for (int i = 0; i < 8; ++i)
            for (int j = 0; j < 8; ++j) cov[i][j] += noise_time[i] * std::conj(noise_time[j]);
    }
    for (auto& row : cov)
        for (auto& c : row) c /= static_cast<double>(n_trials);

    // project the sample covariance on the DFT vectors: eigenvalues -> S_Q[k]
    for (int k = 0; k < 8; ++k) {
        cdouble quad(0.0, 0.0);
        for (int i = 0; i < 8; ++i) {
            for (int j = 0; j < 8; ++j) {
                const double ang = 2.0 * pi * k * (j - i) / 8.0;
                quad += cov[i][j] * cdouble(std::cos(ang), std::sin(ang));
            }
        }
        REQUIRE_THAT(quad.real() / 8.0, WithinRel(s_q[k], 0.05));
    }
}

TEST_CASE("scalar quantizer design") {
    const SystemConfig cfg = small_config();
    SECTION("unit step by construction") {
        const auto spec = design_scalar_quantizer(InvPsdGrid::uniform(cfg, 12.0), cfg);
        for (int k = 0; k < cfg.pilot_len; ++k) REQUIRE_THAT(spec.step(0, k), WithinRel(1.0, 1e-12));
    }
    SECTION("uniform spectrum gives a uniform step") {
        const auto spec = design_scalar_quantizer(InvPsdGrid::uniform(cfg, 3.0), cfg);
        for (int k = 1; k < cfg.pilot_len; ++k) REQUIRE(spec.step(0, k) == spec.step(0, 0));
    }
    SECTION("square-root law in the noise target") {
        const auto coarse = design_scalar_quantizer(InvPsdGrid::uniform(cfg, 2.0), cfg);
        const auto fine = design_scalar_quantizer(InvPsdGrid::uniform(cfg, 4.0), cfg);
        REQUIRE_THAT(coarse.step(0, 0) / fine.step(0, 0), WithinRel(std::sqrt(2.0), 1e-12));
    }
    SECTION("clip radius sits at four sigma of the bin amplitude") {
        const auto spec = design_scalar_quantizer(InvPsdGrid::uniform(cfg, 1.0), cfg);
        const double expected = 4.0 * std::sqrt(16.0 * (1.0 * 0.49 + 0.1));
        REQUIRE_THAT(spec.clip_radius(0, 0), WithinRel(expected, 1e-12));
    }
    SECTION("dropped bins carry no step") {
        InvPsdGrid grid = InvPsdGrid::uniform(cfg, 2.0);
        grid.u(0, 0) = 0.0;
        const auto spec = design_scalar_quantizer(grid, cfg);
        REQUIRE(spec.step(0, 0) == 0.0);
    }
}

TEST_CASE("midrise quantization rule") {
    PilotFrame frame;
    frame.observations = ComplexGrid(1, 4);
    frame.observations(0, 0) = {0.2, -0.2};
    frame.observations(0, 1) = {0.9999, 0.0};
    frame.observations(0, 2) = {-3.7, 1.2};
    frame.observations(0, 3) = {100.0, -100.0};  // beyond the clip radius
    ScalarQuantizerSpec spec{RealGrid(1, 4, 1.0), RealGrid(1, 4, 8.0)};

    const auto out = apply_scalar_quantizer(frame, spec);
    REQUIRE_THAT(out.observations(0, 0).real(), WithinAbs(0.5, 1e-15));
    REQUIRE_THAT(out.observations(0, 0).imag(), WithinAbs(-0.5, 1e-15));
    REQUIRE_THAT(out.observations(0, 1).real(), WithinAbs(0.5, 1e-15));
    REQUIRE_THAT(out.observations(0, 2).real(), WithinAbs(-3.5, 1e-15));
    REQUIRE_THAT(out.observations(0, 2).imag(), WithinAbs(1.5, 1e-15));
    // clipped to 8, then snapped to the adjacent midrise level
    REQUIRE_THAT(out.observations(0, 3).real(), WithinAbs(8.5, 1e-15));

    SECTION("deterministic") {
        const auto again = apply_scalar_quantizer(frame, spec);
        for (int k = 0; k < 4; ++k) REQUIRE(again.observations(0, k) == out.observations(0, k));
    }
}

TEST_CASE("high-resolution quantization error variance approaches step^2/12") {
    const SystemConfig cfg = small_config();
    const double u = 400.0;
    const InvPsdGrid grid = InvPsdGrid::uniform(cfg, u);
    const auto spec = design_scalar_quantizer(grid, cfg);
    double acc = 0.0;
    long count = 0;
    long clipped = 0;
    for (int rep = 0; rep < 800; ++rep) {
        const PilotFrame frame = synthesize_pilot_frame(cfg, 0.0, 0.0, 900 + rep);
        const auto out = apply_scalar_quantizer(frame, spec);
        for (int k = 0; k < cfg.pilot_len; ++k) {
            const cdouble err = out.observations(0, k) - frame.observations(0, k);
            acc += err.real() * err.real() + err.imag() * err.imag();
            count += 2;
            if (std::abs(frame.observations(0, k).real()) > spec.clip_radius(0, k)) ++clipped;
            if (std::abs(frame.observations(0, k).imag()) > spec.clip_radius(0, k)) ++clipped;
        }
    }
    const double step = spec.step(0, 0);
    REQUIRE_THAT(acc / count, WithinRel(step * step / 12.0, 0.10));
    // four-sigma clipping is effectively never active
    REQUIRE(static_cast<double>(clipped) / count < 1e-4);
}

TEST_CASE("data-phase quantizer") {
    SystemConfig cfg = small_config();
    cfg.data_len = 256;
    SECTION("zero variance is the identity") {
        const DataFrame frame = synthesize_data_frame(cfg, 0.1, 0.3, Constellation::qpsk, 4);
        const DataFrame out = apply_data_quantizer(frame, 0.0, 9);
        for (int m = 0; m < cfg.data_len; ++m) REQUIRE(out.observations[m] == frame.observations[m]);
    }
    SECTION("added noise is calibrated") {
        const DataFrame frame = synthesize_data_frame(cfg, 0.0, 0.0, Constellation::qpsk, 4);
        const double s2 = 0.23;
        double acc = 0.0;
        long count = 0;
        for (int rep = 0; rep < 60; ++rep) {
            const DataFrame out = apply_data_quantizer(frame, s2, 40 + rep);
            for (int m = 0; m < cfg.data_len; ++m) {
                acc += std::norm(out.observations[m] - frame.observations[m]);
                ++count;
            }
        }
        REQUIRE(count >= 10000);
        REQUIRE_THAT(acc / count, WithinRel(s2, 0.03));
    }
    SECTION("post-compression SNR matches the noise budget") {
        const double s2 = 0.15;
        double sig = 0.0, err = 0.0;
        for (int rep = 0; rep < 100; ++rep) {
            const DataFrame frame = synthesize_data_frame(cfg, 0.0, 0.0, Constellation::qpsk, rep);
            const DataFrame out = apply_data_quantizer(frame, s2, 7000 + rep);
            for (int m = 0; m < cfg.data_len; ++m) {
                const cdouble clean = cfg.amplitude * frame.symbols[m];
                sig += std::norm(clean);
                err += std::norm(out.observations[m] - clean);
            }
        }
        const double expected = 0.49 / (cfg.data_noise_power() + s2);
        REQUIRE_THAT(sig / err, WithinRel(expected, 0.05));
    }
}
