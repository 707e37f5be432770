#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include "errors.hpp"
#include "kernels.hpp"
#include "numerics.hpp"
#include "parallel.hpp"
#include "quadrature.hpp"
#include "rng.hpp"

namespace mlmom {

using Vec = std::vector<double>;

namespace vecops {
inline double dot(const Vec& a, const Vec& b) {
    double s = 0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}
inline double norm(const Vec& a) { return std::sqrt(dot(a, a)); }
inline Vec axpy(double s, const Vec& x, const Vec& y) {  // s x + y
    Vec r(y);
    for (std::size_t i = 0; i < r.size(); ++i) r[i] += s * x[i];
    return r;
}
inline Vec scaled(double s, const Vec& x) {
    Vec r(x);
    for (auto& e : r) e *= s;
    return r;
}
/// |a x b| in any dimension via the Gram determinant.
inline double cross_norm(const Vec& a, const Vec& b) {
    const double aa = dot(a, a), bb = dot(b, b), ab = dot(a, b);
    return std::sqrt(std::max(0.0, aa * bb - ab * ab));
}
}  // namespace vecops

/// Unit vector orthogonal to `uhat`, preferring the direction of `pref` projected off `uhat`.
inline Vec orthogonal_unit(const Vec& uhat, const Vec& pref) {
    using namespace vecops;
    Vec w = axpy(-dot(pref, uhat), uhat, pref);
    double n = norm(w);
    if (n > 1e-14 * std::max(1.0, norm(pref))) {
        w = scaled(1.0 / n, w);
        w = axpy(-dot(w, uhat), uhat, w);  // second pass restores orthogonality lost to cancellation
        return scaled(1.0 / norm(w), w);
    }
    // fall back to the coordinate axis least aligned with uhat
    std::size_t best = 0;
    for (std::size_t i = 1; i < uhat.size(); ++i)
        if (std::fabs(uhat[i]) < std::fabs(uhat[best])) best = i;
    Vec e(uhat.size(), 0.0);
    e[best] = 1.0;
    w = axpy(-dot(e, uhat), uhat, e);
    return scaled(1.0 / norm(w), w);
}

/// One scattering event (v, v*, theta, omega).
struct CollisionGeometry {
    Vec v, v_star;
    double theta = 0.0;
    Vec omega;

    Vec u() const { return vecops::axpy(-1.0, v_star, v); }
    Vec V() const { return vecops::scaled(0.5, vecops::axpy(1.0, v_star, v)); }
    double h() const { return vecops::cross_norm(v, v_star); }
    Vec uhat() const {
        Vec uu = u();
        const double n = vecops::norm(uu);
        if (n == 0.0) {
            Vec e(uu.size(), 0.0);
            e[0] = 1.0;
            return e;
        }
        return vecops::scaled(1.0 / n, uu);
    }
    /// Azimuthal reference direction: V projected orthogonally to u-hat.
    Vec j() const { return orthogonal_unit(uhat(), V()); }
    Vec sigma() const {
        return vecops::axpy(std::cos(theta), uhat(), vecops::scaled(std::sin(theta), omega));
    }

    /// Geometry with omega = cos(phi) j + sin(phi) (u-hat x j) in d=3, omega = sign(cos phi) j in d=2.
    static CollisionGeometry make(const Vec& v, const Vec& vs, double theta, double phi) {
        CollisionGeometry g{v, vs, theta, {}};
        if (v.size() != vs.size()) throw DomainError("geometry: dimension mismatch");
        const Vec uh = g.uhat();
        const Vec jj = g.j();
        if (v.size() == 2) {
            g.omega = vecops::scaled(std::cos(phi) >= 0 ? 1.0 : -1.0, jj);
        } else if (v.size() == 3) {
            const Vec k = {uh[1] * jj[2] - uh[2] * jj[1], uh[2] * jj[0] - uh[0] * jj[2], uh[0] * jj[1] - uh[1] * jj[0]};
            g.omega = vecops::axpy(std::cos(phi), jj, vecops::scaled(std::sin(phi), k));
        } else {
            throw DomainError("geometry: only d in {2,3} supported");
        }
        return g;
    }
};

struct VelocityPair {
    Vec v_prime, v_star_prime;
};

/// v' = V + |u|/2 sigma, v'_* = V - |u|/2 sigma; identity when u = 0.
inline VelocityPair post_collision(const CollisionGeometry& g) {
    const Vec uu = g.u();
    const double un = vecops::norm(uu);
    if (un == 0.0) return {g.v, g.v_star};
    const Vec V = g.V(), s = g.sigma();
    return {vecops::axpy(0.5 * un, s, V), vecops::axpy(-0.5 * un, s, V)};
}

struct EnergySplit {
    double E;       // convex combination for v'
    double E_star;  // the same at pi - theta, for v'_*
    double P;       // null form h sin(theta) (j.omega)
};

/// <v'>^2 = E + P and <v'_*>^2 = E_star - P.
inline EnergySplit energy_split(const CollisionGeometry& g) {
    const double A = bracket_sq(g.v), B = bracket_sq(g.v_star);
    const double c2 = std::cos(0.5 * g.theta) * std::cos(0.5 * g.theta);
    const double s2 = std::sin(0.5 * g.theta) * std::sin(0.5 * g.theta);
    const double h = g.h();
    const double P = h == 0.0 ? 0.0 : h * std::sin(g.theta) * vecops::dot(g.j(), g.omega);
    return {c2 * A + s2 * B, s2 * A + c2 * B, P};
}

namespace detail {

// (1+x)^p - 1 - p x, accurate for small |x|
inline double second_remainder(double x, double p) {
    if (std::fabs(x) < 1e-3) {
        double term = p * (p - 1) / 2 * x * x, s = term;
        for (int k = 3; k <= 6; ++k) {
            term *= (p - k + 1) / k * x;
            s += term;
        }
        return s;
    }
    return std::expm1(p * std::log1p(x)) - p * x;
}

// X^p - (X-d)^p style difference written as X^p ((1 + delta/X)^p - 1)
inline double power_shift(double X, double delta, double p) { return std::pow(X, p) * std::expm1(p * std::log1p(delta / X)); }

}  // namespace detail

struct GWeightResult {
    double value;
    double error;
};

/// Azimuth-averaged angular profile Phi(theta): int over omega of the change in
/// <v'>^{2p} + <v'_*>^{2p}; the first-order null term is removed analytically.
inline double povzner_profile(double A, double B, double h, double p, double theta, int d) {
    const double s2 = std::sin(0.5 * theta) * std::sin(0.5 * theta);
    const double E1 = A + s2 * (B - A), E2 = B + s2 * (A - B);
    const double S = sphere_measure(d - 2);
    const double first = S * (detail::power_shift(A, s2 * (B - A), p) + detail::power_shift(B, s2 * (A - B), p));
    const double amp = h * std::sin(theta);
    if (amp == 0.0) return first;
    const double e1p = std::pow(E1, p), e2p = std::pow(E2, p);
    auto F = [&](double c) {
        const double P = amp * c;
        return e1p * detail::second_remainder(P / E1, p) + e2p * detail::second_remainder(-P / E2, p);
    };
    if (d == 2) return first + F(1.0) + F(-1.0);
    // d = 3: int_0^{2 pi} F(cos phi) d phi by the periodic trapezoid rule, doubling until settled.
    auto trap = [&](int M) {
        CompensatedSum<> s;
        s += F(1.0);
        s += F(-1.0);
        for (int j = 1; j < M / 2; ++j) s += 2.0 * F(std::cos(2.0 * std::numbers::pi * j / M));
        return static_cast<double>(s.value()) * 2.0 * std::numbers::pi / M;
    };
    int M = 16;
    double prev = trap(M);
    for (M = 32; M <= 16384; M *= 2) {
        const double cur = trap(M);
        if (std::fabs(cur - prev) <= 1e-13 * (std::fabs(cur) + std::fabs(first))) return first + cur;
        prev = cur;
    }
    return first + prev;
}

/// G_rq(v, v*) by theta quadrature of the azimuth-averaged integrand.
inline GWeightResult g_weight_direct(const CollisionKernel& k, const Vec& v, const Vec& vs, double rq, double tol) {
    if (!(rq > 0.0)) throw DomainError("g_weight_direct: rq must be positive");
    const int d = k.d();
    if (static_cast<int>(v.size()) != d || static_cast<int>(vs.size()) != d)
        throw DomainError("g_weight_direct: velocity dimension does not match the kernel");
    if (d != 2 && d != 3) throw DomainError("g_weight_direct: only d in {2,3} supported");
    const double un = vecops::norm(vecops::axpy(-1.0, vs, v));
    if (un == 0.0) return {0.0, 0.0};
    const double p = rq / 2.0;
    if (p == 1.0) return {0.0, 0.0};  // energy is collision invariant
    const double A = bracket_sq(v), B = bracket_sq(vs), h = vecops::cross_norm(v, vs);
    const double ug = std::pow(un, k.gamma);
    QuadOptions opt;
    opt.rel_tol = 1e-10;
    opt.abs_tol = 0.25 * tol / ug;
    auto r = polar_integral(k.angular, [&](double th) { return povzner_profile(A, B, h, p, th, d); }, 2.0, opt);
    GWeightResult out{ug * r.value, ug * r.error};
    if (!r.converged || out.error > tol) throw ToleranceError("g_weight_direct: tolerance not met", out.error);
    return out;
}

enum class BoundForm {
    printed,      // loss and gain terms weighted by A_2
    halved_loss,  // loss and gain terms weighted by A_2/2, as carried through the proof
};

/// Right side of the averaged Povzner inequality from precomputed A_2 and eps_{rq/2}.
inline double g_weight_bound(double A2, double eps_half, double gamma, const Vec& v, const Vec& vs, double rq,
                             BoundForm form = BoundForm::printed) {
    if (!(rq >= 2.0)) throw DomainError("g_weight_bound: requires rq >= 2");
    const double A = bracket_sq(v), B = bracket_sq(vs);
    const double un = vecops::norm(vecops::axpy(-1.0, vs, v));
    if (un == 0.0) return 0.0;
    const double p = rq / 2.0;
    const double w = form == BoundForm::printed ? A2 : 0.5 * A2;
    const double loss = -w * (std::pow(A, p) + std::pow(B, p));
    const double gain = w * (std::pow(A, p - 1) * B + A * std::pow(B, p - 1));
    const double mixed = eps_half * A2 * p * (p - 1) * A * B * std::pow(A + B, p - 2);
    return std::pow(un, gamma) * (loss + gain + mixed);
}

inline double g_weight_bound(const CollisionKernel& k, const EpsilonSequence& eps, const Vec& v, const Vec& vs,
                             double rq, BoundForm form = BoundForm::printed) {
    const double A2 = a_beta(k.angular, 2.0).value;
    return g_weight_bound(A2, eps.at(rq / 2.0), k.gamma, v, vs, rq, form);
}

struct GapPair {
    double lhs, rhs;
};

/// Symmetrized convex binomial expansion gap and its claimed upper bound.
inline GapPair convex_binomial_gap(double a, double b, double t, double p) {
    if (!(a >= 0.0 && b >= 0.0)) throw DomainError("convex_binomial_gap: a, b must be nonnegative");
    if (!(t >= 0.0 && t <= 1.0)) throw DomainError("convex_binomial_gap: t must lie in [0,1]");
    if (!(p > 0.0) || (p > 1.0 && p < 2.0)) throw DomainError("convex_binomial_gap: p must lie in (0,1] or [2,inf)");
    auto mixed = [p](double x, double y) {  // x y^{p-1}
        if (x == 0.0) return 0.0;
        return x * std::pow(y, p - 1);
    };
    const double lhs = std::pow(t * a + (1 - t) * b, p) + std::pow((1 - t) * a + t * b, p) - std::pow(a, p) - std::pow(b, p);
    const double w = 2 * t * (1 - t);
    const double rhs = -w * (std::pow(a, p) + std::pow(b, p)) + w * (mixed(a, b) + mixed(b, a));
    return {lhs, rhs};
}

/// |E(theta) + t h sin(theta) (j.omega)| against (A+B)(1 - (t/4) sin^2 theta).
inline GapPair mixed_term_check(const CollisionGeometry& g, double t) {
    const auto sp = energy_split(g);
    const double A = bracket_sq(g.v), B = bracket_sq(g.v_star);
    const double lhs = std::fabs(sp.E + t * sp.P);
    const double rhs = (A + B) * (1.0 - 0.25 * t * std::sin(g.theta) * std::sin(g.theta));
    return {lhs, rhs};
}

/// One row of a Povzner domination sweep.
struct PovznerRow {
    Vec v, v_star;
    double rq, direct, direct_err, bound, bound_halved;
    double margin() const { return bound - direct; }
    bool dominated() const { return direct <= bound + direct_err; }
};

struct PovznerSweepConfig {
    CollisionKernel kernel;
    std::vector<double> rq_values{4.0, 6.0, 9.4};
    std::size_t configurations = 1000;
    std::uint64_t seed = 1;
    double rel_tol = 1e-8;
    unsigned workers = 1;
};

/// Random velocity with a log-uniform speed scale, drawn from stream `index`.
inline Vec sample_velocity(CounterStream& rs, int d) {
    const double scale = std::exp(rs.uniform(std::log(0.1), std::log(10.0)));
    Vec v(d);
    for (auto& x : v) x = scale * rs.normal();
    return v;
}

inline std::vector<PovznerRow> povzner_sweep(const PovznerSweepConfig& cfg) {
    const auto& k = cfg.kernel;
    const double A2 = a_beta(k.angular, 2.0).value;
    std::vector<double> halves;
    for (double rq : cfg.rq_values) halves.push_back(rq / 2.0);
    std::vector<double> eps(halves.size());
    for (std::size_t i = 0; i < halves.size(); ++i) eps[i] = epsilon_q(k.angular, std::max(2.0, halves[i]));
    const std::size_t nrq = cfg.rq_values.size();
    std::vector<PovznerRow> rows(cfg.configurations * nrq);
    parallel_for(cfg.configurations, cfg.workers, [&](std::size_t c) {
        CounterStream rs(cfg.seed, 0x9077u, static_cast<std::uint32_t>(c));
        const Vec v = sample_velocity(rs, k.d()), vs = sample_velocity(rs, k.d());
        for (std::size_t r = 0; r < nrq; ++r) {
            const double rq = cfg.rq_values[r];
            const double b = g_weight_bound(A2, eps[r], k.gamma, v, vs, rq);
            const double bh = g_weight_bound(A2, eps[r], k.gamma, v, vs, rq, BoundForm::halved_loss);
            const double scale = std::pow(vecops::norm(vecops::axpy(-1.0, vs, v)), k.gamma) * A2 *
                                 std::pow(bracket_sq(v) + bracket_sq(vs), rq / 2.0);
            const auto g = g_weight_direct(k, v, vs, rq, std::max(cfg.rel_tol * scale, 1e-300));
            rows[c * nrq + r] = {v, vs, rq, g.value, g.error, b, bh};
        }
    });
    return rows;
}

}  // namespace mlmom
