#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <algorithm>
#include <optional>
#include <vector>

#include "frontsync/common.hpp"
#include "frontsync/config.hpp"
#include "frontsync/metrics.hpp"

namespace frontsync {

/// Charnes-Cooper change of variables v = (1 + (N0/Ts) u)^{-1}, v in (0, 1].
inline double charnes_cooper(double u_value, const SystemConfig& cfg) {
    if (!(u_value >= 0.0)) throw std::domain_error("charnes_cooper: u must be >= 0");
    return 1.0 / (1.0 + cfg.pilot_noise_power() * u_value);
}

inline double charnes_cooper_inverse(double v_value, const SystemConfig& cfg) {
    if (!(v_value > 0.0) || v_value > 1.0)
        throw std::domain_error("charnes_cooper_inverse: v must be in (0, 1]");
    const double noise = cfg.pilot_noise_power();
    if (!(noise > 0.0))
        throw std::domain_error("charnes_cooper_inverse: requires N0/Ts > 0");
    return (1.0 / v_value - 1.0) / noise;
}

/// Fisher weights of the fractional objective: b feeds the phase term,
/// a = (2 pi / (N_p T_s))^2 k_c^2 b feeds the timing term.
struct DcCoefficients {
    RealGrid a;
    RealGrid b;
    double weight_theta = 0.0;  // A^2 E_xd
    double weight_tau = 0.0;    // A^2 E_xd a_bar / T^2
};

inline DcCoefficients make_dc_coefficients(const SystemConfig& cfg, double a_bar) {
    DcCoefficients c;
    c.a = RealGrid(cfg.oversampling, cfg.pilot_len);
    c.b = RealGrid(cfg.oversampling, cfg.pilot_len);
    const PolyphaseResponse resp = polyphase_response(cfg);
    const double slope = 2.0 * pi / (cfg.pilot_len * cfg.sample_period());
    for (int n = 0; n < cfg.oversampling; ++n) {
        for (int k = 0; k < cfg.pilot_len; ++k) {
            const double kc = centered_index(k, cfg.pilot_len);
            const double b = cfg.pilot_energy * cfg.amplitude * cfg.amplitude *
                             std::norm(resp.g_freq(n, k));
            c.b(n, k) = b;
            c.a(n, k) = slope * slope * kc * kc * b;
        }
    }
    const double a2e = cfg.amplitude * cfg.amplitude * cfg.data_energy;
    c.weight_theta = a2e;
    c.weight_tau = a2e * a_bar / (cfg.symbol_period * cfg.symbol_period);
    return c;
}

/// Transformed objective: the phase term divides by the b-sum, the timing
/// term by the a-sum. Returns +inf when a Fisher sum vanishes (v == 1).
/// A term whose weight grid is identically zero (e.g. the timing term when
/// only the zero-frequency bin exists) is absent, not infinite.
inline double dc_objective(const RealGrid& v, const DcCoefficients& coeffs,
                           const SystemConfig& cfg) {
    const double noise = cfg.pilot_noise_power();
    double sum_a = 0.0, sum_b = 0.0;
    double tot_a = 0.0, tot_b = 0.0;
    for (int n = 0; n < v.branches(); ++n) {
        for (int k = 0; k < v.bins(); ++k) {
            const double one_minus = 1.0 - v(n, k);
            sum_a += coeffs.a(n, k) / noise * one_minus;
            sum_b += coeffs.b(n, k) / noise * one_minus;
            tot_a += coeffs.a(n, k);
            tot_b += coeffs.b(n, k);
        }
    }
    double value = 0.0;
    if (tot_b > 0.0) {
        if (!(sum_b > 0.0)) return inf;
        value += coeffs.weight_theta / sum_b;
    }
    if (tot_a > 0.0) {
        if (!(sum_a > 0.0)) return inf;
        value += coeffs.weight_tau / sum_a;
    }
    return value;
}

/// Tangent of the concave rate term log2(b(1-v) + N0/Ts) at v_iterate.
inline std::pair<RealGrid, RealGrid> dc_linearize(const RealGrid& v_iterate,
                                                  const DcCoefficients& coeffs,
                                                  const SystemConfig& cfg) {
    const double noise = cfg.pilot_noise_power();
    RealGrid e(v_iterate.branches(), v_iterate.bins());
    RealGrid f(v_iterate.branches(), v_iterate.bins());
    for (int n = 0; n < v_iterate.branches(); ++n) {
        for (int k = 0; k < v_iterate.bins(); ++k) {
            const double b = coeffs.b(n, k);
            const double v = v_iterate(n, k);
            e(n, k) = -b / (std::log(2.0) * (noise + b - b * v));
            f(n, k) = std::log2(b * (1.0 - v) + noise) - e(n, k) * v;
        }
    }
    return {std::move(e), std::move(f)};
}

/// Exact fronthaul rate (bits) of the training field expressed in v.
inline double pilot_rate_v(const RealGrid& v, const DcCoefficients& coeffs,
                           const SystemConfig& cfg) {
    const double noise = cfg.pilot_noise_power();
    double bits = 0.0;
    for (int n = 0; n < v.branches(); ++n)
        for (int k = 0; k < v.bins(); ++k)
            bits += std::log2((coeffs.b(n, k) * (1.0 - v(n, k)) + noise) / (noise * v(n, k)));
    return bits;
}

namespace detail {

/// Flattened view of the convex subproblem:
///   minimize dc_objective(v)
///   s.t.     sum(e v + f - log2((N0/Ts) v)) <= N_p C,  0 < v <= 1.
struct Subproblem {
    std::vector<double> a, b, e, f;
    double noise = 0.0;
    double budget = 0.0;
    double w_theta = 0.0, w_tau = 0.0;
    bool has_tau = true, has_theta = true;  // structurally present terms

    std::size_t dim() const { return a.size(); }

    double objective(const std::vector<double>& v) const {
        double sum_a = 0.0, sum_b = 0.0;
        for (std::size_t i = 0; i < v.size(); ++i) {
            sum_a += a[i] / noise * (1.0 - v[i]);
            sum_b += b[i] / noise * (1.0 - v[i]);
        }
        double value = 0.0;
        if (has_theta) {
            if (!(sum_b > 0.0)) return inf;
            value += w_theta / sum_b;
        }
        if (has_tau) {
            if (!(sum_a > 0.0)) return inf;
            value += w_tau / sum_a;
        }
        return value;
    }

    double constraint(const std::vector<double>& v) const {
        double acc = -budget;
        for (std::size_t i = 0; i < v.size(); ++i)
            acc += e[i] * v[i] + f[i] - std::log2(noise * v[i]);
        return acc;
    }
};

/// Damped-Newton log-barrier minimizer for the subproblem. The -log2(v) term
/// inside the rate constraint already repels v -> 0, so barriers are needed
/// only on the constraint itself and the upper box v < 1.
inline std::vector<double> solve_barrier(const Subproblem& sp, std::vector<double> v,
                                         double gap_target) {
    using Vec = Eigen::VectorXd;
    using Mat = Eigen::MatrixXd;
    const auto n = static_cast<Eigen::Index>(sp.dim());
    const double ln2 = std::log(2.0);
    const double m_constraints = 1.0 + static_cast<double>(sp.dim());

    const auto barrier_value = [&](const std::vector<double>& x, double t, double hx) {
        double val = t * sp.objective(x) - std::log(-hx);
        for (double xi : x) val -= std::log(1.0 - xi);
        return val;
    };

    for (double t = 1.0; m_constraints / t > gap_target; t *= 20.0) {
        for (int iter = 0; iter < 100; ++iter) {
            double sum_a = 0.0, sum_b = 0.0;
            for (std::size_t i = 0; i < sp.dim(); ++i) {
                sum_a += sp.a[i] / sp.noise * (1.0 - v[i]);
                sum_b += sp.b[i] / sp.noise * (1.0 - v[i]);
            }
            const double hx = sp.constraint(v);

            Vec grad(n);
            Vec ga(n), gb(n), gh(n);
            for (Eigen::Index i = 0; i < n; ++i) {
                ga(i) = sp.a[i] / sp.noise;
                gb(i) = sp.b[i] / sp.noise;
                gh(i) = sp.e[i] - 1.0 / (v[i] * ln2);
            }
            const double ctheta = sp.has_theta ? sp.w_theta / (sum_b * sum_b) : 0.0;
            const double ctau = sp.has_tau ? sp.w_tau / (sum_a * sum_a) : 0.0;
            for (Eigen::Index i = 0; i < n; ++i) {
                const double dphi = ctheta * gb(i) + ctau * ga(i);
                grad(i) = t * dphi - gh(i) / hx + 1.0 / (1.0 - v[i]);
            }
            Mat hess = (gh * gh.transpose()) / (hx * hx);
            if (sp.has_theta)
                hess += (2.0 * t * sp.w_theta / (sum_b * sum_b * sum_b)) * (gb * gb.transpose());
            if (sp.has_tau)
                hess += (2.0 * t * sp.w_tau / (sum_a * sum_a * sum_a)) * (ga * ga.transpose());
            for (Eigen::Index i = 0; i < n; ++i) {
                hess(i, i) += (-1.0 / hx) / (v[i] * v[i] * ln2) +
                              1.0 / ((1.0 - v[i]) * (1.0 - v[i]));
            }

            Vec step = hess.ldlt().solve(-grad);
            const double lambda2 = -grad.dot(step);
            if (!(lambda2 > 0.0)) break;  // stationary or indefinite round-off
            if (lambda2 / 2.0 < 1e-13) break;

            const double b0 = barrier_value(v, t, hx);
            double alpha = 1.0;
            std::vector<double> cand(sp.dim());
            bool moved = false;
            for (int ls = 0; ls < 90; ++ls) {
                bool valid = true;
                for (std::size_t i = 0; i < sp.dim(); ++i) {
                    cand[i] = v[i] + alpha * step(static_cast<Eigen::Index>(i));
                    if (!(cand[i] > 1e-14) || !(cand[i] < 1.0 - 1e-14)) {
                        valid = false;
                        break;
                    }
                }
                if (valid) {
                    const double hc = sp.constraint(cand);
                    if (hc < 0.0 &&
                        barrier_value(cand, t, hc) <= b0 + 0.25 * alpha * grad.dot(step)) {
                        v = cand;
                        moved = true;
                        break;
                    }
                }
                alpha *= 0.5;
            }
            if (!moved) break;
        }
    }
    return v;
}

inline std::vector<double> flatten(const RealGrid& g) {
    return std::vector<double>(g.data(), g.data() + g.size());
}

inline RealGrid unflatten(const std::vector<double>& x, int branches, int bins) {
    RealGrid g(branches, bins);
    std::copy(x.begin(), x.end(), g.data());
    return g;
}

/// A strictly interior point of the linearized feasible set, reached by
/// pushing the (feasible) iterate toward v = 1; the linearized rate is
/// strictly decreasing in every coordinate.
inline std::vector<double> interior_start(const Subproblem& sp, const std::vector<double>& vi) {
    const auto clamp_in = [](double x) { return std::clamp(x, 1e-12, 1.0 - 1e-12); };
    std::vector<double> cand(vi.size());
    for (double s : {0.05, 0.2, 0.5, 0.9}) {
        for (std::size_t i = 0; i < vi.size(); ++i) cand[i] = clamp_in(vi[i] + s * (1.0 - vi[i]));
        if (sp.constraint(cand) < -1e-9) return cand;
    }
    for (double delta : {1e-3, 1e-6, 1e-9, 1e-12}) {
        std::fill(cand.begin(), cand.end(), 1.0 - delta);
        if (sp.constraint(cand) < -1e-9) return cand;
    }
    throw std::runtime_error("solve_convex_subproblem: no strictly feasible start found");
}

}  // namespace detail

/// Solve the convex inner problem of the DC loop by a log-barrier interior
/// point method with damped Newton steps.
inline RealGrid solve_convex_subproblem(const DcCoefficients& coeffs, const RealGrid& e,
                                        const RealGrid& f, const SystemConfig& cfg, double tol,
                                        std::optional<RealGrid> start = std::nullopt) {
    if (!coeffs.a.same_shape(e) || !coeffs.a.same_shape(f))
        throw std::invalid_argument("solve_convex_subproblem: grid shapes disagree");
    detail::Subproblem sp;
    sp.a = detail::flatten(coeffs.a);
    sp.b = detail::flatten(coeffs.b);
    sp.e = detail::flatten(e);
    sp.f = detail::flatten(f);
    sp.noise = cfg.pilot_noise_power();
    sp.budget = cfg.pilot_len * cfg.capacity;
    sp.w_theta = coeffs.weight_theta;
    sp.w_tau = coeffs.weight_tau;
    sp.has_theta = std::any_of(sp.b.begin(), sp.b.end(), [](double x) { return x > 0.0; });
    sp.has_tau = std::any_of(sp.a.begin(), sp.a.end(), [](double x) { return x > 0.0; });
    if (!(sp.noise > 0.0))
        throw std::invalid_argument("solve_convex_subproblem: requires N0/Ts > 0");
    if (!(sp.budget > 0.0)) throw std::invalid_argument("solve_convex_subproblem: empty rate budget");

    std::vector<double> v0;
    if (start) {
        v0 = detail::flatten(*start);
        for (double& x : v0) x = std::clamp(x, 1e-12, 1.0 - 1e-12);
        if (sp.constraint(v0) >= 0.0) v0 = detail::interior_start(sp, v0);
    } else {
        v0 = detail::interior_start(sp, std::vector<double>(sp.dim(), 1.0));
    }
    const double gap = std::clamp(tol, 1e-12, 1e-6);
    return detail::unflatten(detail::solve_barrier(sp, std::move(v0), gap),
                             coeffs.a.branches(), coeffs.a.bins());
}

struct DcIterate {
    RealGrid v;
    double objective = inf;
    double constraint_slack = 0.0;  // N_p C minus the exact rate, in bits
};

struct DcTrace {
    std::vector<DcIterate> iterates;  // iterate 0 is the all-ones initialization
    bool converged = false;
    double a_bar = 0.0;
    double nominal_delta_tau_max = 0.0;
    int iterations() const { return static_cast<int>(iterates.size()) - 1; }
};

/// Unique sigma2_qd > 0 saturating the data-phase rate budget, by bisection.
inline double data_phase_noise_variance(const SystemConfig& cfg) {
    const double target = cfg.data_len * cfg.capacity;
    double lo = 1e-300, hi = 1.0;
    while (data_rate(cfg, hi) > target) {
        hi *= 2.0;
        if (hi > 1e300) throw std::runtime_error("data_phase_noise_variance: no root");
    }
    while (data_rate(cfg, lo) < target) lo *= 2.0;
    for (int i = 0; i < 300; ++i) {
        const double mid = std::sqrt(lo * hi);  // geometric: sigma2 spans decades
        if (data_rate(cfg, mid) > target)
            lo = mid;
        else
            hi = mid;
    }
    return std::sqrt(lo * hi);
}

/// Uniform inverse PSD saturating the training-phase rate budget.
inline InvPsdGrid white_psd_baseline(const SystemConfig& cfg) {
    cfg.validate();
    const double budget = cfg.pilot_len * cfg.capacity;
    double hi = 1.0;
    while (pilot_rate(cfg, InvPsdGrid::uniform(cfg, hi)) < budget) {
        hi *= 2.0;
        if (hi > 1e300) throw std::runtime_error("white_psd_baseline: budget not reachable");
    }
    double lo = 0.0;
    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (lo + hi);
        if (pilot_rate(cfg, InvPsdGrid::uniform(cfg, mid)) < budget)
            lo = mid;
        else
            hi = mid;
    }
    InvPsdGrid grid = InvPsdGrid::uniform(cfg, 0.5 * (lo + hi));
    grid.sigma2_qd = data_phase_noise_variance(cfg);
    return grid;
}

/// Difference-of-convex outer loop: linearize the concave rate term at the
/// current iterate, solve the convex subproblem, repeat until the objective
/// stalls. Every accepted iterate is feasible for the exact rate constraint.
inline std::pair<InvPsdGrid, DcTrace> optimize_psd(const SystemConfig& cfg, int max_iters = 200,
                                                   double tol = 1e-8) {
    cfg.validate();
    if (!(cfg.pilot_noise_power() > 0.0))
        throw std::invalid_argument("optimize_psd: requires N0/Ts > 0");

    // Linear-approximation weight a_bar from the white baseline at this
    // operating point, held constant during the optimization.
    const InvPsdGrid baseline = white_psd_baseline(cfg);
    const CrbPair crb_white = crb(cfg, baseline);
    const double dtau_nominal =
        std::min(std::sqrt(12.0 * crb_white.crb_tau), 0.999 * cfg.symbol_period);
    const LinearApproxCoeffs lin = linear_approx_coeffs(
        dtau_nominal, std::sqrt(12.0 * crb_white.crb_theta), cfg);
    const DcCoefficients coeffs = make_dc_coefficients(cfg, lin.a_bar);

    const double budget = cfg.pilot_len * cfg.capacity;
    DcTrace trace;
    trace.a_bar = lin.a_bar;
    trace.nominal_delta_tau_max = dtau_nominal;

    RealGrid v(cfg.oversampling, cfg.pilot_len, 1.0);
    trace.iterates.push_back({v, dc_objective(v, coeffs, cfg), budget - pilot_rate_v(v, coeffs, cfg)});

    double prev_obj = trace.iterates.back().objective;
    for (int i = 0; i < max_iters; ++i) {
        const auto [e, f] = dc_linearize(v, coeffs, cfg);
        RealGrid v_next = solve_convex_subproblem(coeffs, e, f, cfg, 1e-10);
        const double obj = dc_objective(v_next, coeffs, cfg);
        if (std::isfinite(prev_obj) && obj > prev_obj) {
            trace.converged = true;  // inner solver can no longer descend
            break;
        }
        v = std::move(v_next);
        trace.iterates.push_back({v, obj, budget - pilot_rate_v(v, coeffs, cfg)});
        if (std::isfinite(prev_obj) &&
            std::abs(prev_obj - obj) <= tol * std::max(std::abs(prev_obj), 1e-300)) {
            trace.converged = true;
            break;
        }
        prev_obj = obj;
    }

    InvPsdGrid grid;
    grid.u = RealGrid(cfg.oversampling, cfg.pilot_len);
    double u_max = 0.0;
    for (int n = 0; n < cfg.oversampling; ++n) {
        for (int k = 0; k < cfg.pilot_len; ++k) {
            grid.u(n, k) = charnes_cooper_inverse(v(n, k), cfg);
            u_max = std::max(u_max, grid.u(n, k));
        }
    }
    for (double& uv : grid.u) {
        if (uv < 1e-9 * u_max) uv = 0.0;  // dropped bin
    }
    grid.sigma2_qd = data_phase_noise_variance(cfg);
    return {std::move(grid), std::move(trace)};
}

}  // namespace frontsync
