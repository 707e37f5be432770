#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "errors.hpp"
#include "kernels.hpp"
#include "numerics.hpp"
#include "quadrature.hpp"
#include "specfun.hpp"

namespace mlmom {

enum class Provenance { simulated, analytic_maxwellian, synthetic_tail };

inline std::string to_string(Provenance p) {
    switch (p) {
        case Provenance::simulated: return "simulated";
        case Provenance::analytic_maxwellian: return "analytic_maxwellian";
        case Provenance::synthetic_tail: return "synthetic_tail";
    }
    return "unknown";
}

/// Moments m_q = int f <v>^q at one time, stored as logarithms so high orders cannot overflow.
struct MomentSnapshot {
    double t = 0.0;
    std::map<double, double> log_m;      // order -> log m_order
    std::map<double, double> std_error;  // order -> standard error of m_order (simulated data)

    void set(double order, double log_value, double se = 0.0) {
        log_m[order] = log_value;
        if (se > 0.0) std_error[order] = se;
    }

    struct Lookup {
        double log_value;
        bool interpolated;
    };

    /// Exact lookup, else log-linear interpolation in the order between bracketing entries.
    std::optional<Lookup> find(double order) const {
        constexpr double tol = 1e-12;
        auto it = log_m.lower_bound(order - tol * std::max(1.0, std::fabs(order)));
        if (it != log_m.end() && std::fabs(it->first - order) <= tol * std::max(1.0, std::fabs(order)))
            return Lookup{it->second, false};
        if (it == log_m.end() || it == log_m.begin()) return std::nullopt;
        auto lo = std::prev(it);
        const double w = (order - lo->first) / (it->first - lo->first);
        return Lookup{(1 - w) * lo->second + w * it->second, true};
    }

    bool has(double order) const { return find(order).has_value(); }

    double log_moment(double order) const {
        auto r = find(order);
        if (!r) throw MissingMomentError("moment of order " + std::to_string(order) + " unavailable", {order});
        return r->log_value;
    }
    double moment(double order) const { return std::exp(log_moment(order)); }

    /// Throws MissingMomentError listing every order in `orders` that cannot be supplied.
    void require(const std::vector<double>& orders) const {
        std::vector<double> missing;
        for (double o : orders)
            if (!has(o)) missing.push_back(o);
        if (!missing.empty()) {
            std::string msg = "missing moment orders:";
            for (double o : missing) msg += " " + std::to_string(o);
            throw MissingMomentError(msg, missing);
        }
    }

    double max_order() const { return log_m.empty() ? -1.0 : log_m.rbegin()->first; }
};

struct MomentTrajectory {
    std::vector<MomentSnapshot> snapshots;  // increasing in t
    Provenance provenance = Provenance::simulated;
    double tail_s = 0.0;      // synthetic tails: order s
    double tail_alpha = 0.0;  // synthetic tails: rate; Maxwellian: 1/(2T)

    std::vector<double> times() const {
        std::vector<double> out;
        for (const auto& s : snapshots) out.push_back(s.t);
        return out;
    }
    bool empty() const { return snapshots.empty(); }
    const MomentSnapshot& at_time(double t) const {
        for (const auto& s : snapshots)
            if (std::fabs(s.t - t) <= 1e-12 * std::max(1.0, std::fabs(t))) return s;
        throw DomainError("trajectory has no snapshot at t=" + std::to_string(t));
    }
    double horizon() const { return snapshots.empty() ? 0.0 : snapshots.back().t; }
};

/// Polynomial orders {2q, 2q + gamma : q = 0..qmax} plus optional extra orders.
inline std::vector<double> ladder_orders(int qmax, double gamma, std::vector<double> extra = {}) {
    std::vector<double> o;
    for (int q = 0; q <= qmax; ++q) {
        o.push_back(2.0 * q);
        if (gamma > 0) o.push_back(2.0 * q + gamma);
    }
    o.insert(o.end(), extra.begin(), extra.end());
    std::sort(o.begin(), o.end());
    o.erase(std::unique(o.begin(), o.end()), o.end());
    return o;
}

/// log( |S^{d-1}| int_0^inf r^{d-1} exp(log_g(r)) dr ) for a unimodal-ish log integrand.
inline double log_radial_integral(const std::function<double(double)>& log_g, int d) {
    auto phi = [&](double x) { return log_g(std::exp(x)) + d * x; };
    // coarse scan in x = log r for the peak
    double xmax = 0, pmax = -std::numeric_limits<double>::infinity();
    for (double x = -25.0; x <= 80.0; x += 0.02) {
        const double p = phi(x);
        if (p > pmax) {
            pmax = p;
            xmax = x;
        }
    }
    if (!std::isfinite(pmax)) throw DomainError("log_radial_integral: integrand not finite");
    double lo = xmax, hi = xmax;
    while (lo > -60.0 && phi(lo) > pmax - 80.0) lo -= 0.25;
    while (hi < 120.0 && phi(hi) > pmax - 80.0) hi += 0.25;
    QuadOptions opt;
    opt.rel_tol = 1e-13;
    auto r = integrate([&](double x) { return std::exp(phi(x) - pmax); }, lo, hi, opt, {xmax});
    require_converged(r, 1e-10 * r.value, "log_radial_integral");
    return pmax + std::log(r.value) + std::log(sphere_measure(d - 1));
}

/// Centred Maxwellian (2 pi T)^{-d/2} exp(-|v|^2 / 2T) with unit mass.
struct Maxwellian {
    double T = 1.0;
    int d = 3;

    double log_density(double r) const {
        return -r * r / (2 * T) - 0.5 * d * std::log(2 * std::numbers::pi * T);
    }
    /// log m_order for any real order, by radial quadrature.
    double log_moment(double order) const {
        return log_radial_integral([&](double r) { return log_density(r) + 0.5 * order * std::log1p(r * r); }, d);
    }
    /// Equilibrium ratio m_4 / m_2^2.
    double kurtosis_ratio() const {
        const double m2 = 1 + d * T;
        const double m4 = 1 + 2 * d * T + d * (d + 2) * T * T;
        return m4 / (m2 * m2);
    }
};

/// Radially symmetric density C exp(-alpha0 <v>^s0), normalized to unit mass.
struct HeavyTail {
    double s0 = 1.0;
    double alpha0 = 0.5;
    int d = 3;

    double log_unnormalized(double r) const { return -alpha0 * std::pow(1 + r * r, 0.5 * s0); }
    double log_norm() const {
        return log_radial_integral([&](double r) { return log_unnormalized(r); }, d);
    }
    double log_density(double r) const { return log_unnormalized(r) - log_norm(); }
    double log_moment(double order, double log_z) const {
        return log_radial_integral([&](double r) { return log_unnormalized(r) + 0.5 * order * std::log1p(r * r); }, d) -
               log_z;
    }
    double log_moment(double order) const { return log_moment(order, log_norm()); }
};

template <class Ladder>
MomentSnapshot snapshot_from(const Ladder& f, double t, const std::vector<double>& orders) {
    MomentSnapshot s;
    s.t = t;
    for (double o : orders) s.set(o, f(o));
    return s;
}

/// Stationary trajectory of analytic Maxwellian moments on a time grid.
inline MomentTrajectory maxwellian_trajectory(const Maxwellian& m, const std::vector<double>& times,
                                              const std::vector<double>& orders) {
    MomentTrajectory tr;
    tr.provenance = Provenance::analytic_maxwellian;
    tr.tail_s = 2.0;
    tr.tail_alpha = 1.0 / (2.0 * m.T);
    const auto snap = snapshot_from([&](double o) { return m.log_moment(o); }, 0.0, orders);
    for (double t : times) {
        tr.snapshots.push_back(snap);
        tr.snapshots.back().t = t;
    }
    return tr;
}

/// Stationary synthetic-tail trajectory exp(-alpha0 <v>^s0) on a time grid.
inline MomentTrajectory synthetic_tail_trajectory(const HeavyTail& h, const std::vector<double>& times,
                                                  const std::vector<double>& orders) {
    MomentTrajectory tr;
    tr.provenance = Provenance::synthetic_tail;
    tr.tail_s = h.s0;
    tr.tail_alpha = h.alpha0;
    const double lz = h.log_norm();
    const auto snap = snapshot_from([&](double o) { return h.log_moment(o, lz); }, 0.0, orders);
    for (double t : times) {
        tr.snapshots.push_back(snap);
        tr.snapshots.back().t = t;
    }
    return tr;
}

/// True when log m is nondecreasing in the order on the snapshot.
inline bool monotone_in_order(const MomentSnapshot& s, double slack = 0.0) {
    double prev = -std::numeric_limits<double>::infinity();
    for (const auto& [o, lm] : s.log_m) {
        if (lm < prev - slack) return false;
        prev = lm;
    }
    return true;
}

}  // namespace mlmom
