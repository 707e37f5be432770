#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <vector>

#include "errors.hpp"
#include "kernels.hpp"
#include "moments.hpp"
#include "numerics.hpp"

namespace mlmom {

/// log bold-B for Bernoulli data (A, B) at order rp, assembled as printed.
inline double log_bold_B_from(double A, double B, double rp, double gamma) {
    if (!(rp > 0 && A > 0 && B > 0 && gamma > 0)) throw DomainError("bold_B: parameters must be positive");
    const double e = rp / gamma, x = gamma * B / rp;
    const double first = -e * (std::log(1.0 / x) + x);  // ((rp/(gamma B)) e^{gamma B/rp})^{-rp/gamma}
    const double second = -e * std::log(-std::expm1(-x));
    return -e * std::log(A / B) + std::max(first, second);
}

/// Constants shared by every moment inequality.
struct BoundConstants {
    double A2 = 0, gamma = 1, C_gamma = 1, K1 = 0, K2 = 0, K3 = 0, m0 = 1, m2_0 = 1;

    static BoundConstants make(double A2, double gamma, double m0, double m2_0) {
        if (!(A2 > 0 && gamma > 0 && gamma <= 1 && m0 > 0 && m2_0 > 0))
            throw DomainError("BoundConstants: need A2, m0, m2 > 0 and gamma in (0,1]");
        BoundConstants c;
        c.A2 = A2;
        c.gamma = gamma;
        c.m0 = m0;
        c.m2_0 = m2_0;
        c.C_gamma = std::min(1.0, std::pow(2.0, 1.0 - gamma));
        c.K1 = A2 * c.C_gamma * m0;
        c.K2 = A2 * (1.0 + 2.0 / c.C_gamma) * m2_0;
        c.K3 = A2 / c.C_gamma;
        return c;
    }
    static BoundConstants make(const CollisionKernel& k, double m0, double m2_0) {
        return make(a_beta(k.angular, 2.0).value, k.gamma, m0, m2_0);
    }

    /// Linear growth rate after absorbing the quadratic terms with eps <= 1.
    double B_rp(double rp) const { return K2 + std::pow(2.0, rp) * K3; }

    /// log of the generation constant bold-B_rp, assembled as printed.
    double log_bold_B(double rp) const { return log_bold_B_from(K1, B_rp(rp), rp, gamma); }
    double bold_B(double rp) const { return std::exp(log_bold_B(rp)); }

    /// log c_{q0}: max over p in {0..2 q0 + 1} of {bold-B_p, B_p bold-B_p}; the p = 0 slot is the mass.
    double log_c_q0(int q0) const {
        double best = std::log(m0);
        for (int p = 1; p <= 2 * q0 + 1; ++p) {
            const double lb = log_bold_B(p);
            best = std::max({best, lb, lb + std::log(B_rp(p))});
        }
        return best;
    }
    /// Generation analogue over orders gamma q, q in {0..q0 - 1}.
    double log_c_star_q0(int q0) const {
        double best = std::log(m0);
        for (int q = 1; q < q0; ++q) {
            const double rp = gamma * q, lb = log_bold_B(rp);
            best = std::max({best, lb, lb + std::log(B_rp(rp))});
        }
        return best;
    }
};

/// Right side of the m_{2q} differential inequality used for propagation.
inline double ode_rhs_propagation(const BoundConstants& c, const EpsilonSequence& eps, const MomentSnapshot& m, int q,
                                  double gamma) {
    if (q < 2) throw DomainError("ode_rhs_propagation: q >= 2 required");
    const long kq = k_index(q);
    std::vector<double> need = {2.0 * q + gamma, 2.0 * q};
    for (long k = 1; k <= kq; ++k)
        for (double o : {2.0 * k + gamma, 2.0 * (q - k), 2.0 * k, 2.0 * (q - k) + gamma}) need.push_back(o);
    m.require(need);
    CompensatedSum<> sum;
    for (long k = 1; k <= kq; ++k) {
        const real_ext bin = binom_real(q - 2, static_cast<int>(k - 1));
        const real_ext t1 = std::exp(static_cast<real_ext>(m.log_moment(2.0 * k + gamma)) + m.log_moment(2.0 * (q - k)));
        const real_ext t2 = std::exp(static_cast<real_ext>(m.log_moment(2.0 * k)) + m.log_moment(2.0 * (q - k) + gamma));
        sum += bin * (t1 + t2);
    }
    const double mixed = c.K3 * eps.at(q) * q * (q - 1.0) * static_cast<double>(sum.value());
    return -c.K1 * m.moment(2.0 * q + gamma) + c.K2 * m.moment(2.0 * q) + mixed;
}

/// Right side of the m_{gamma q} differential inequality used for generation.
/// When q/2 - 2/gamma < 0 the sum is empty and only the first two terms remain.
inline double ode_rhs_generation(const BoundConstants& c, const EpsilonSequence& eps, const MomentSnapshot& m, int q,
                                 double gamma) {
    if (q < 0) throw DomainError("ode_rhs_generation: q >= 0 required");
    const double gq = gamma * q;
    m.require({gq + gamma, gq});
    const double head = -c.K1 * m.moment(gq + gamma) + c.K2 * m.moment(gq);
    const double top = q / 2.0 - 2.0 / gamma;
    if (top < 0) return head;
    const long upper = 1 + k_index(top);
    std::vector<double> need;
    for (long k = 1; k <= upper; ++k)
        for (double o : {2 * gamma * k + gamma, gq - 2 * gamma * k, 2 * gamma * k, gq - 2 * gamma * k + gamma})
            need.push_back(o);
    m.require(need);
    CompensatedSum<> sum;
    for (long k = 1; k <= upper; ++k) {
        const real_ext bin = binom_real(top, static_cast<int>(k - 1));
        const real_ext t1 = std::exp(static_cast<real_ext>(m.log_moment(2 * gamma * k + gamma)) +
                                     m.log_moment(gq - 2 * gamma * k));
        const real_ext t2 = std::exp(static_cast<real_ext>(m.log_moment(2 * gamma * k)) +
                                     m.log_moment(gq - 2 * gamma * k + gamma));
        sum += bin * (t1 + t2);
    }
    const double h = gq / 2.0;
    return head + c.K3 * eps.at(h) * h * (h - 1.0) * static_cast<double>(sum.value());
}

/// Upper solution of y' = B y - A y^{1+gamma/rp}.
/// With m_rp_0 set: propagation form from that initial value.
/// Without it: generation form bold-B_rp max{1, t^{-rp/gamma}}; t = 0 gives +inf.
inline double bernoulli_envelope(const BoundConstants& c, double B_rp, double rp, double gamma,
                                 std::optional<double> m_rp_0, double t) {
    if (!(rp > 0 && gamma > 0 && B_rp > 0 && c.K1 > 0)) throw DomainError("bernoulli_envelope: invalid parameters");
    if (t < 0) throw DomainError("bernoulli_envelope: t >= 0 required");
    const double A = c.K1, B = B_rp, ce = gamma / rp;
    if (m_rp_0) {
        if (!(*m_rp_0 > 0)) throw DomainError("bernoulli_envelope: initial moment must be positive");
        const double decay = std::exp(-t * B * ce);
        const double grow = -std::expm1(-t * B * ce);
        return std::pow(std::pow(*m_rp_0, -ce) * decay + (A / B) * grow, -1.0 / ce);
    }
    if (t == 0) return std::numeric_limits<double>::infinity();
    const double lb = log_bold_B_from(A, B, rp, gamma);
    return std::exp(lb + std::max(0.0, -rp / gamma * std::log(t)));
}

/// Jensen lower bound m_{rp+gamma} >= m0^{-gamma/rp} m_rp^{1+gamma/rp}.
inline double jensen_lower(double m0, double m_rp, double rp, double gamma) {
    if (!(m0 > 0 && m_rp > 0 && rp > 0 && gamma > 0)) throw DomainError("jensen_lower: inputs must be positive");
    return std::pow(m0, -gamma / rp) * std::pow(m_rp, 1.0 + gamma / rp);
}

struct TriangleCheck {
    double value, upper, lower;
};

/// |v - v*|^gamma with its upper and lower comparison bounds.
template <class V>
TriangleCheck triangle_bounds(const V& v, const V& vs, double gamma) {
    double du = 0;
    for (std::size_t i = 0; i < v.size(); ++i) du += (v[i] - vs[i]) * (v[i] - vs[i]);
    const double cg = std::min(1.0, std::pow(2.0, 1.0 - gamma));
    const double a = std::pow(bracket_sq(v), gamma / 2), b = std::pow(bracket_sq(vs), gamma / 2);
    return {std::pow(du, gamma / 2), (a + b) / cg, cg * a - b};
}

struct PowerGap {
    double lhs, rhs;
};

/// (<v>^2 + <v*>^2)^{gamma q/2 - 2} against (<v>^{2 gamma} + <v*>^{2 gamma})^{q/2 - 2/gamma}.
inline PowerGap two_to_s(double A, double B, double gamma, double q) {
    if (!(q >= 4.0 / gamma)) throw DomainError("two_to_s: q >= 4/gamma required");
    return {std::pow(A + B, gamma * q / 2 - 2), std::pow(std::pow(A, gamma) + std::pow(B, gamma), q / 2 - 2 / gamma)};
}

/// Smallest q <= qmax beyond which K1 m_{2q+gamma} > K2 m_{2q} holds up to qmax.
inline std::optional<int> leading_term_threshold(const BoundConstants& c, const MomentSnapshot& m, double gamma,
                                                 int qmax) {
    std::optional<int> first;
    for (int q = 0; q <= qmax; ++q) {
        const bool dom = std::log(c.K1) + m.log_moment(2.0 * q + gamma) > std::log(c.K2) + m.log_moment(2.0 * q);
        if (dom && !first) first = q;
        if (!dom) first.reset();
    }
    return first;
}

}  // namespace mlmom
