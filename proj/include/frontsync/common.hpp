#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <vector>

namespace frontsync {

using cdouble = std::complex<double>;

inline constexpr double pi = 3.14159265358979323846;
inline constexpr double inf = std::numeric_limits<double>::infinity();

inline double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }
inline double linear_to_db(double x) { return 10.0 * std::log10(x); }

/// sin(pi x)/(pi x), continuous at zero and exactly zero at other integers.
inline double sinc(double x) {
    if (x == std::nearbyint(x)) return x == 0.0 ? 1.0 : 0.0;
    const double px = pi * x;
    return std::sin(px) / px;
}

/// Wrap to [-1/2, 1/2) in units of cycles.
inline double wrap_unit(double x) { return x - std::nearbyint(x); }

/// Wrap to [-pi, pi).
inline double wrap_pi(double x) { return 2.0 * pi * wrap_unit(x / (2.0 * pi)); }

/// Centered DFT index: bin k of an N-point DFT maps to
/// k_c in {-floor(N/2), ..., ceil(N/2)-1}.
inline int centered_index(int k, int n_bins) {
    return k < (n_bins + 1) / 2 ? k : k - n_bins;
}

/// Dense F x N grid indexed by (polyphase branch, frequency bin).
template <typename T>
class BranchGrid {
public:
    BranchGrid() = default;
    BranchGrid(int branches, int bins, T init = T{})
        : branches_(branches), bins_(bins),
          data_(static_cast<std::size_t>(branches) * bins, init) {
        if (branches <= 0 || bins <= 0)
            throw std::invalid_argument("BranchGrid: nonpositive shape");
    }

    int branches() const { return branches_; }
    int bins() const { return bins_; }
    std::size_t size() const { return data_.size(); }

    T& operator()(int n, int k) { return data_[static_cast<std::size_t>(n) * bins_ + k]; }
    const T& operator()(int n, int k) const {
        return data_[static_cast<std::size_t>(n) * bins_ + k];
    }

    T* data() { return data_.data(); }
    const T* data() const { return data_.data(); }

    bool same_shape(const BranchGrid& other) const {
        return branches_ == other.branches_ && bins_ == other.bins_;
    }

    auto begin() { return data_.begin(); }
    auto end() { return data_.end(); }
    auto begin() const { return data_.begin(); }
    auto end() const { return data_.end(); }

private:
    int branches_ = 0;
    int bins_ = 0;
    std::vector<T> data_;
};

using RealGrid = BranchGrid<double>;
using ComplexGrid = BranchGrid<cdouble>;
using MaskGrid = BranchGrid<unsigned char>;

}  // namespace frontsync
