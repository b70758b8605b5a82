#pragma once

#include <vector>

#include "frontsync/common.hpp"

namespace frontsync {

namespace detail {

inline bool is_pow2(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

/// In-place iterative radix-2 transform; sign = -1 forward, +1 inverse (unscaled).
inline void fft_pow2(std::vector<cdouble>& a, int sign) {
    const std::size_t n = a.size();
    for (std::size_t i = 1, j = 0; i < n; ++i) {
        std::size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(a[i], a[j]);
    }
    for (std::size_t len = 2; len <= n; len <<= 1) {
        const double ang = sign * 2.0 * pi / static_cast<double>(len);
        const cdouble wl(std::cos(ang), std::sin(ang));
        for (std::size_t i = 0; i < n; i += len) {
            cdouble w(1.0, 0.0);
            for (std::size_t j = 0; j < len / 2; ++j) {
                const cdouble u = a[i + j];
                const cdouble v = a[i + j + len / 2] * w;
                a[i + j] = u + v;
                a[i + j + len / 2] = u - v;
                w *= wl;
            }
        }
    }
}

}  // namespace detail

/// Unnormalized forward DFT: X[k] = sum_m x[m] exp(-j 2 pi k m / N).
inline std::vector<cdouble> dft(const std::vector<cdouble>& x) {
    const std::size_t n = x.size();
    std::vector<cdouble> out(x);
    if (detail::is_pow2(n)) {
        detail::fft_pow2(out, -1);
        return out;
    }
    for (std::size_t k = 0; k < n; ++k) {
        cdouble acc(0.0, 0.0);
        for (std::size_t m = 0; m < n; ++m) {
            const double ang = -2.0 * pi * static_cast<double>(k * m % n) / static_cast<double>(n);
            acc += x[m] * cdouble(std::cos(ang), std::sin(ang));
        }
        out[k] = acc;
    }
    return out;
}

/// Inverse of dft(): x[m] = (1/N) sum_k X[k] exp(+j 2 pi k m / N).
inline std::vector<cdouble> idft(const std::vector<cdouble>& x) {
    const std::size_t n = x.size();
    std::vector<cdouble> out(x);
    if (detail::is_pow2(n)) {
        detail::fft_pow2(out, +1);
    } else {
        for (std::size_t m = 0; m < n; ++m) {
            cdouble acc(0.0, 0.0);
            for (std::size_t k = 0; k < n; ++k) {
                const double ang = 2.0 * pi * static_cast<double>(k * m % n) / static_cast<double>(n);
                acc += x[k] * cdouble(std::cos(ang), std::sin(ang));
            }
            out[m] = acc;
        }
    }
    const double scale = 1.0 / static_cast<double>(n);
    for (auto& v : out) v *= scale;
    return out;
}

}  // namespace frontsync
