#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <vector>

#include "combinatoric.hpp"
#include "errors.hpp"
#include "kernels.hpp"
#include "moment_bounds.hpp"
#include "moments.hpp"
#include "numerics.hpp"
#include "parallel.hpp"
#include "specfun.hpp"

namespace mlmom {

enum class SumMode { propagation, generation };

struct PartialSumState {
    int n = 0;
    double a = 1, alpha = 0;  // generation: alpha holds the ramp alpha t
    double log_E = 0, log_I = 0;
    SumMode mode = SumMode::propagation;
    double E() const { return std::exp(log_E); }
    double I() const { return std::exp(log_I); }
};

namespace detail {

/// log sum_{q=0}^n m_{2q + shift} alpha^{aq} / Gamma(aq+1).
inline double log_ml_partial(const MomentSnapshot& m, double a, double alpha, int n, double shift) {
    if (n < 0) throw DomainError("partial sum: n >= 0 required");
    std::vector<double> need;
    for (int q = 0; q <= n; ++q) need.push_back(2.0 * q + shift);
    m.require(need);
    LogSumAccumulator acc;
    const real_ext la = std::log(static_cast<real_ext>(alpha));
    for (int q = 0; q <= n; ++q)
        acc.add(static_cast<real_ext>(m.log_moment(2.0 * q + shift)) + a * q * la - log_gamma_ext(a * q + 1.0L));
    return static_cast<double>(acc.log_value());
}

/// log sum_{q=0}^n m_{gamma q + shift} x^q / q!.
inline double log_gen_partial(const MomentSnapshot& m, double gamma, double x, int n, double shift) {
    if (n < 0) throw DomainError("partial sum: n >= 0 required");
    std::vector<double> need;
    for (int q = 0; q <= n; ++q) need.push_back(gamma * q + shift);
    m.require(need);
    LogSumAccumulator acc;
    for (int q = 0; q <= n; ++q) {
        const real_ext lw = (q == 0) ? 0.0L : (x > 0 ? q * std::log(static_cast<real_ext>(x)) : -INFINITY);
        acc.add(static_cast<real_ext>(m.log_moment(gamma * q + shift)) + lw - log_gamma_ext(q + 1.0L));
    }
    return static_cast<double>(acc.log_value());
}

}  // namespace detail

/// E^n_a(alpha, t) = sum_{q<=n} m_{2q}(t) alpha^{aq} / Gamma(aq+1).
inline double partial_sum_E(const MomentTrajectory& tr, const MLSpec& spec, int n, double t) {
    return std::exp(detail::log_ml_partial(tr.at_time(t), spec.a(), spec.alpha(), n, 0.0));
}
inline double log_partial_sum_E(const MomentSnapshot& m, const MLSpec& spec, int n) {
    return detail::log_ml_partial(m, spec.a(), spec.alpha(), n, 0.0);
}

/// I^n_{a,gamma}(alpha, t) with moments shifted to 2q + gamma.
inline double partial_sum_I(const MomentTrajectory& tr, const MLSpec& spec, int n, double t, double gamma) {
    return std::exp(detail::log_ml_partial(tr.at_time(t), spec.a(), spec.alpha(), n, gamma));
}
inline double log_partial_sum_I(const MomentSnapshot& m, const MLSpec& spec, int n, double gamma) {
    return detail::log_ml_partial(m, spec.a(), spec.alpha(), n, gamma);
}

/// Generation sums E^n_gamma(alpha t, t) and I^n_{gamma,gamma}(alpha t, t) with weights (alpha t)^q / q!.
inline PartialSumState generation_sums(const MomentSnapshot& m, double gamma, double alpha, int n) {
    PartialSumState s;
    s.n = n;
    s.a = 2.0 / gamma;
    s.alpha = alpha * m.t;
    s.mode = SumMode::generation;
    s.log_E = detail::log_gen_partial(m, gamma, s.alpha, n, 0.0);
    s.log_I = detail::log_gen_partial(m, gamma, s.alpha, n, gamma);
    return s;
}

inline PartialSumState propagation_sums(const MomentSnapshot& m, const MLSpec& spec, int n, double gamma) {
    PartialSumState s;
    s.n = n;
    s.a = spec.a();
    s.alpha = spec.alpha();
    s.log_E = log_partial_sum_E(m, spec, n);
    s.log_I = log_partial_sum_I(m, spec, n, gamma);
    return s;
}

/// alpha^{-gamma/2} (E_n - m0 e^{alpha^{a-1}}), the lower bound for I^n.
inline double lower_bound_check(double E_n, double m0, const MLSpec& spec, double gamma) {
    const double al = spec.alpha(), a = spec.a();
    return std::pow(al, -gamma / 2) * (E_n - m0 * std::exp(std::pow(al, a - 1)));
}

struct BootstrapReport {
    MLSpec spec;
    double M0 = 0, horizon = 0;
    std::vector<int> n_grid;
    std::vector<double> T_n;
    bool all_reach_horizon = true;
    std::optional<int> first_collapse_n;  // smallest n whose T_n < horizon
};

/// T_n = first snapshot time with E^n >= 4 M0 (horizon when never reached), for n = 0..n_max.
inline BootstrapReport bootstrap_scan(const MomentTrajectory& tr, const MLSpec& spec, double M0, int n_max) {
    if (tr.empty()) throw UsageError("bootstrap_scan: empty trajectory");
    BootstrapReport rep{spec, M0, tr.horizon(), {}, {}, true, std::nullopt};
    const double thr = std::log(4.0 * M0);
    rep.T_n.assign(n_max + 1, tr.horizon());
    std::vector<bool> hit(n_max + 1, false);
    const real_ext la = std::log(static_cast<real_ext>(spec.alpha()));
    for (const auto& snap : tr.snapshots) {
        LogSumAccumulator acc;
        for (int n = 0; n <= n_max; ++n) {
            acc.add(static_cast<real_ext>(snap.log_moment(2.0 * n)) + spec.a() * n * la - log_gamma_ext(spec.a() * n + 1.0L));
            if (!hit[n] && acc.log_value() >= thr) {
                hit[n] = true;
                rep.T_n[n] = snap.t;
            }
        }
    }
    for (int n = 0; n <= n_max; ++n) {
        rep.n_grid.push_back(n);
        if (hit[n]) {
            rep.all_reach_horizon = false;
            if (!rep.first_collapse_n) rep.first_collapse_n = n;
        }
    }
    return rep;
}

/// Initial Mittag-Leffler moment M0 = E^n_a(alpha0, 0) with n = 200 by default.
inline double initial_ml_moment(const MomentTrajectory& tr, const MLSpec& spec0, int n = 200) {
    return std::exp(log_partial_sum_E(tr.snapshots.front(), spec0, n));
}

struct TailFit {
    double s_hat = 0, alpha_hat = 0;
    double s_se = 0, alpha_se = 0;
    double a_hat = 0;
    double rms_residual = 0;
    int points = 0;
};

/// Fits log m_{2q} on {q log q, q, log q, 1} over q in [q_lo, q_hi].
/// The q log q slope is a = 2/s and the q slope is a (log a - 1 - log alpha).
inline TailFit estimate_tail_order(const MomentSnapshot& m, int q_lo, int q_hi) {
    if (q_lo < 1 || q_hi - q_lo + 1 < 4) throw FitDegenerateError("estimate_tail_order: need at least 4 orders with q >= 1");
    const int n = q_hi - q_lo + 1;
    Eigen::MatrixXd X(n, 4);
    Eigen::VectorXd y(n);
    for (int i = 0; i < n; ++i) {
        const double q = q_lo + i;
        if (!m.has(2 * q)) throw MissingMomentError("estimate_tail_order: missing order", {2 * q});
        X(i, 0) = q * std::log(q);
        X(i, 1) = q;
        X(i, 2) = std::log(q);
        X(i, 3) = 1.0;
        y(i) = m.log_moment(2 * q);
        if (!std::isfinite(y(i))) throw FitDegenerateError("estimate_tail_order: nonpositive moment");
    }
    for (int i = 1; i + 1 < n; ++i)
        if (y(i + 1) - 2 * y(i) + y(i - 1) < -1e-9 * std::max(1.0, std::fabs(y(i))))
            throw FitDegenerateError("estimate_tail_order: moments are not log-convex in the order");
    // column scaling keeps the QR well conditioned
    Eigen::VectorXd sc = X.colwise().norm().transpose();
    Eigen::MatrixXd Xs = X * sc.cwiseInverse().asDiagonal();
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(Xs);
    if (qr.rank() < 4) throw FitDegenerateError("estimate_tail_order: rank-deficient design");
    Eigen::VectorXd beta = qr.solve(y).cwiseQuotient(sc);
    const Eigen::VectorXd res = y - X * beta;
    const double rss = res.squaredNorm();
    TailFit f;
    f.points = n;
    f.rms_residual = std::sqrt(rss / n);
    f.a_hat = beta(0);
    if (!(f.a_hat > 0)) throw FitDegenerateError("estimate_tail_order: nonpositive growth exponent");
    f.s_hat = 2.0 / f.a_hat;
    const double log_alpha = std::log(f.a_hat) - 1.0 - beta(1) / f.a_hat;
    f.alpha_hat = std::exp(log_alpha);
    if (n > 4) {
        const double sigma2 = rss / (n - 4);
        const Eigen::MatrixXd cov = sigma2 * (X.transpose() * X).inverse();
        f.s_se = 2.0 / (f.a_hat * f.a_hat) * std::sqrt(std::max(0.0, cov(0, 0)));
        Eigen::Vector2d g(1.0 / f.a_hat + beta(1) / (f.a_hat * f.a_hat), -1.0 / f.a_hat);
        Eigen::Matrix2d c2;
        c2 << cov(0, 0), cov(0, 1), cov(1, 0), cov(1, 1);
        f.alpha_se = f.alpha_hat * std::sqrt(std::max(0.0, g.dot(c2 * g)));
    }
    return f;
}

inline TailFit estimate_tail_order(const MomentTrajectory& tr, double t, int q_lo, int q_hi) {
    return estimate_tail_order(tr.at_time(t), q_lo, q_hi);
}

// ---- smallness conditions as numeric searches ----

/// alpha < (ln 2)^{1/a}, i.e. e^{alpha^a} <= 2.
inline double alpha_ln2_cap(double a) { return std::pow(std::log(2.0), 1.0 / a); }

/// Smallest integer q0 in [2, q_max] with K1 - 4 eps_{q0} q0^{2-a} C_a K3 M0 > K1/2.
inline std::optional<int> find_q0(const BoundConstants& c, const AngularKernel& k, double a, double C_a, double M0,
                                  int q_max) {
    for (int q0 = 2; q0 <= q_max; q0 = q0 < 64 ? q0 + 1 : q0 * 2) {
        const double lhs = c.K1 - 4 * epsilon_q(k, q0) * std::pow(q0, 2 - a) * C_a * c.K3 * M0;
        if (lhs > c.K1 / 2) return q0;
    }
    return std::nullopt;
}

/// Largest alpha with m0 e^{alpha^{a-1}} + (2 alpha^{gamma/2}/K1) K0 < 3 M0,
/// K0 = 2 c_{q0}(1 + K1) + 4 K2 M0. Returns nullopt when even alpha -> 0 fails.
inline std::optional<double> find_alpha1(const BoundConstants& c, int q0, double M0, double a) {
    if (!(a > 1)) throw DomainError("find_alpha1: a > 1 required");
    const double K0 = 2 * std::exp(c.log_c_q0(q0)) * (1 + c.K1) + 4 * c.K2 * M0;
    auto lhs_ok = [&](double al) {
        return c.m0 * std::exp(std::pow(al, a - 1)) + 2 * std::pow(al, c.gamma / 2) / c.K1 * K0 < 3 * M0;
    };
    if (!(c.m0 < 3 * M0)) return std::nullopt;
    double lo, hi = 1;
    while (lhs_ok(hi) && hi < 1e6) hi *= 2;
    if (lhs_ok(hi)) return hi;
    double probe = hi;
    while (!lhs_ok(probe)) {
        probe /= 2;
        if (probe < 1e-300) return std::nullopt;
    }
    lo = probe;
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        (lhs_ok(mid) ? lo : hi) = mid;
    }
    return lo;
}

/// alpha bound K1 M0* / (2 K_{q0}) with K_{q0} = 2 c*_{q0} + 4 M0* K2 + 2 K1 c*_{q0}.
inline double g_alpha_bound(const BoundConstants& c, int q0, double M0_star) {
    const double cs = std::exp(c.log_c_star_q0(q0));
    const double Kq0 = 2 * cs + 4 * M0_star * c.K2 + 2 * c.K1 * cs;
    return c.K1 * M0_star / (2 * Kq0);
}

/// Empirical C_a: largest normalized A4 Beta-sum ratio over q in [3, q_hi].
inline double measured_C_a(double a, int q_hi = 300) {
    double mx = 0;
    for (const auto& r : sweep_A4(a, 3, q_hi).rows) mx = std::max(mx, r.normalized);
    return mx;
}

}  // namespace mlmom
