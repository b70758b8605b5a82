#pragma once

#include <cstdint>
#include <random>

#include "frontsync/common.hpp"

namespace frontsync {

namespace detail {
/// splitmix64 finalizer; decorrelates derived seeds.
inline std::uint64_t mix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}
}  // namespace detail

/// Seedable random stream. Gaussian draws use Box-Muller on the raw engine
/// output so sequences are identical across standard-library implementations.
class RngStream {
public:
    explicit RngStream(std::uint64_t seed) : engine_(detail::mix64(seed)) {}

    /// Independent substream for (seed, index); used to parallelize trials.
    static RngStream derive(std::uint64_t seed, std::uint64_t index) {
        return RngStream(detail::mix64(seed ^ detail::mix64(index + 1)));
    }

    /// Uniform on (0, 1].
    double uniform01() {
        return (static_cast<double>(engine_() >> 11) + 1.0) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    std::uint64_t bits() { return engine_(); }

    /// Standard normal.
    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        const double u1 = uniform01();
        const double u2 = uniform01();
        const double rad = std::sqrt(-2.0 * std::log(u1));
        const double ang = 2.0 * pi * u2;
        spare_ = rad * std::sin(ang);
        have_spare_ = true;
        return rad * std::cos(ang);
    }

    /// Circularly symmetric complex Gaussian with E|z|^2 = variance.
    cdouble complex_normal(double variance) {
        const double s = std::sqrt(0.5 * variance);
        const double re = normal();
        const double im = normal();
        return {s * re, s * im};
    }

private:
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

}  // namespace frontsync
