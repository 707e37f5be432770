#pragma once

#include <cmath>
#include <map>
#include <numbers>
#include <string>
#include <vector>

#include "errors.hpp"
#include "parallel.hpp"
#include "quadrature.hpp"
#include "specfun.hpp"

namespace mlmom {

/// |S^{n}|, surface measure of the unit n-sphere in R^{n+1}.
inline double sphere_measure(int n) {
    if (n < 0) throw DomainError("sphere_measure: negative dimension");
    const double h = 0.5 * (n + 1);
    return 2.0 * std::pow(std::numbers::pi, h) / gamma_fn(h);
}

/// Angular kernel, described through its polar density rho(theta) = b(cos theta) sin^{d-2}(theta).
struct AngularKernel {
    enum class Family { PowerLawSingular, GradBounded, TruncatedSingular };

    Family family = Family::GradBounded;
    int d = 3;
    double nu = 0.0;         // singularity exponent
    double scale = 1.0;      // C for singular families, b0 for the bounded one
    double theta_min = 0.0;  // truncation angle

    static AngularKernel power_law(double nu, double C = 1.0, int d = 3) {
        if (!(nu > 0.0 && nu < 2.0)) throw DomainError("power_law: nu must lie in (0,2)");
        return check({Family::PowerLawSingular, d, nu, C, 0.0});
    }
    static AngularKernel grad_bounded(double b0, int d = 3) {
        return check({Family::GradBounded, d, 0.0, b0, 0.0});
    }
    static AngularKernel truncated(double nu, double theta_min, double C = 1.0, int d = 3) {
        if (!(nu > 0.0 && nu < 2.0)) throw DomainError("truncated: nu must lie in (0,2)");
        if (!(theta_min > 0.0 && theta_min < std::numbers::pi))
            throw DomainError("truncated: theta_min must lie in (0,pi)");
        return check({Family::TruncatedSingular, d, nu, C, theta_min});
    }

    double rho(double th) const {
        switch (family) {
            case Family::GradBounded:
                return scale * (d == 2 ? 1.0 : std::pow(std::sin(th), d - 2));
            case Family::PowerLawSingular:
                return scale * std::pow(th, -1.0 - nu);
            case Family::TruncatedSingular:
                return th < theta_min ? 0.0 : scale * std::pow(th, -1.0 - nu);
        }
        return 0.0;
    }

    /// b(cos theta) itself.
    double b(double th) const {
        if (family == Family::GradBounded) return scale;
        return rho(th) / (d == 2 ? 1.0 : std::pow(std::sin(th), d - 2));
    }

    bool singular() const { return family == Family::PowerLawSingular; }
    bool integrable() const { return family != Family::PowerLawSingular; }

    std::string name() const {
        switch (family) {
            case Family::GradBounded: return "grad_bounded";
            case Family::PowerLawSingular: return "power_law";
            case Family::TruncatedSingular: return "truncated";
        }
        return "?";
    }

private:
    static AngularKernel check(AngularKernel k) {
        if (k.d < 2) throw DomainError("kernel: dimension must be >= 2");
        if (!(k.scale > 0.0)) throw DomainError("kernel: scale must be positive");
        return k;
    }
};

/// B(|u|, cos theta) = |u|^gamma b(cos theta).
struct CollisionKernel {
    double gamma = 1.0;
    AngularKernel angular;

    CollisionKernel() = default;
    CollisionKernel(double g, AngularKernel k) : gamma(g), angular(k) {
        if (!(g > 0.0 && g <= 1.0)) throw DomainError("collision kernel: gamma must lie in (0,1]");
    }
    int d() const { return angular.d; }
};

namespace detail {
inline constexpr double kGrazingCut = 1e-6;
}

/// int_0^pi rho(theta) g(theta) d theta. `order` is the power with which g vanishes at 0;
/// for the unbounded family the piece below 1e-6 is taken from that leading power.
template <class G>
QuadResult polar_integral(const AngularKernel& k, G&& g, double order, const QuadOptions& opt = {},
                          const std::vector<double>& breaks = {}) {
    constexpr double pi = std::numbers::pi;
    auto f = [&](double th) { return k.rho(th) * g(th); };
    QuadResult out;
    auto add_smooth = [&](double lo, double hi) {
        std::vector<double> br;
        for (double x : breaks)
            if (x > lo && x < hi) br.push_back(x);
        out += integrate(f, lo, hi, opt, br);
    };
    switch (k.family) {
        case AngularKernel::Family::GradBounded:
            add_smooth(0.0, pi);
            break;
        case AngularKernel::Family::TruncatedSingular:
            if (k.theta_min < 1.0) {
                out += integrate_log(f, k.theta_min, 1.0, opt);
                add_smooth(1.0, pi);
            } else {
                add_smooth(k.theta_min, pi);
            }
            break;
        case AngularKernel::Family::PowerLawSingular: {
            if (!(order > k.nu)) throw DivergenceError("polar integral diverges at grazing angles");
            const double e = detail::kGrazingCut;
            const double head = k.scale * g(e) * std::pow(e, -k.nu) / (order - k.nu);
            out.value += head;
            out.error += std::fabs(head) * 1e-11;
            out += integrate_log(f, e, 1.0, opt);
            add_smooth(1.0, pi);
            break;
        }
    }
    return out;
}

struct ABetaResult {
    double value;
    double error;
};

/// A_beta = |S^{d-2}| int rho sin^beta.
inline ABetaResult a_beta(const AngularKernel& k, double beta) {
    if (!(beta > 0.0 && beta <= 2.0)) throw DomainError("a_beta: beta must lie in (0,2]");
    if (k.singular() && beta <= k.nu)
        throw DivergenceError("a_beta: beta <= nu, the weighted integral diverges");
    QuadOptions opt;
    opt.rel_tol = 1e-12;
    auto r = polar_integral(k, [beta](double th) { return std::pow(std::sin(th), beta); }, beta, opt);
    require_converged(r, 1e-9 * std::fabs(r.value), "a_beta");
    const double S = sphere_measure(k.d - 2);
    return {S * r.value, S * r.error};
}

/// Total collision frequency int b d sigma; finite only for integrable kernels.
inline double total_rate(const AngularKernel& k) {
    if (k.singular()) throw DivergenceError("total_rate: kernel is not integrable");
    if (k.family == AngularKernel::Family::TruncatedSingular) {
        const double lam = k.scale * (std::pow(k.theta_min, -k.nu) - std::pow(std::numbers::pi, -k.nu)) / k.nu;
        return sphere_measure(k.d - 2) * lam;
    }
    auto r = polar_integral(k, [](double) { return 1.0; }, 0.0);
    return sphere_measure(k.d - 2) * r.value;
}

/// int_0^1 t (1 - c t)^n dt for c in [0, 1), n > -1, without cancellation.
inline real_ext epsilon_inner(real_ext c, real_ext n) {
    if (c == 0) return 0.5L;
    const real_ext m = n + 1;
    if (m * c < 0.5L) {
        CompensatedSum<> s;
        real_ext coef = 1;  // C(n,k)(-c)^k
        for (int k = 0; k < 400; ++k) {
            const real_ext term = coef / (k + 2);
            s += term;
            if (std::fabs(term) < 1e-21L * std::fabs(s.value())) break;
            coef *= -(n - k) * c / (k + 1);
            if (coef == 0) break;
        }
        return s.value();
    }
    // [1 - (1-c)^{m} (1 + m c)] / (c^2 m (m+1))
    const real_ext x = m * std::log1p(-c) + std::log1p(m * c);
    return -std::expm1(x) / (c * c * m * (m + 1));
}

/// epsilon_q, normalized so that epsilon_2 = 1.
inline double epsilon_q(const AngularKernel& k, double q) {
    if (!(q >= 2.0)) throw DomainError("epsilon_q: q must be >= 2");
    if (k.singular() && k.nu >= 2.0) throw DivergenceError("epsilon_q: A_2 diverges");
    QuadOptions opt;
    opt.rel_tol = 1e-11;
    std::vector<double> br;
    const double w = 1.0 / std::sqrt(q);
    for (double f : {0.25, 1.0, 4.0})
        if (f * w < std::numbers::pi) br.push_back(f * w);
    auto num = polar_integral(
        k,
        [q](double th) {
            const double s2 = std::sin(th) * std::sin(th);
            return s2 * static_cast<double>(epsilon_inner(0.5L * s2, q - 2.0L));
        },
        2.0, opt, br);
    auto den = polar_integral(k, [](double th) { return std::sin(th) * std::sin(th); }, 2.0, opt);
    require_converged(num, 1e-9 * std::fabs(num.value), "epsilon_q");
    require_converged(den, 1e-9 * std::fabs(den.value), "epsilon_q");
    return 2.0 * num.value / den.value;
}

/// epsilon_q on a grid with the normalized profile eps_q q^{1-beta/2}.
struct EpsilonSequence {
    std::vector<double> q;
    std::vector<double> values;
    std::vector<double> normalized;
    double beta = 2.0;
    double monotone_from = 32.0;

    double at(double qq) const {
        for (std::size_t i = 0; i < q.size(); ++i)
            if (std::fabs(q[i] - qq) <= 1e-12 * std::fmax(1.0, qq)) return values[i];
        throw DomainError("EpsilonSequence: q=" + std::to_string(qq) + " not on the grid");
    }
    bool has(double qq) const {
        for (double x : q)
            if (std::fabs(x - qq) <= 1e-12 * std::fmax(1.0, qq)) return true;
        return false;
    }
    /// Nonincreasing normalized profile for q >= monotone_from.
    bool eventually_nonincreasing() const {
        for (std::size_t i = 1; i < q.size(); ++i)
            if (q[i - 1] >= monotone_from && normalized[i] > normalized[i - 1]) return false;
        return true;
    }
    bool values_nonincreasing() const {
        for (std::size_t i = 1; i < q.size(); ++i)
            if (values[i] > values[i - 1]) return false;
        return true;
    }
    double final_over_initial() const { return normalized.back() / normalized.front(); }
    /// final normalized value over the value at q = ref (first grid point >= ref).
    double final_over(double ref) const {
        for (std::size_t i = 0; i < q.size(); ++i)
            if (q[i] >= ref) return normalized.back() / normalized[i];
        return 1.0;
    }
};

inline EpsilonSequence epsilon_sequence(const AngularKernel& k, const std::vector<double>& grid, double beta,
                                        unsigned workers = 1) {
    EpsilonSequence es;
    es.q = grid;
    es.beta = beta;
    es.values.assign(grid.size(), 0.0);
    es.normalized.assign(grid.size(), 0.0);
    parallel_for(grid.size(), workers, [&](std::size_t i) {
        es.values[i] = epsilon_q(k, grid[i]);
        es.normalized[i] = es.values[i] * std::pow(grid[i], 1.0 - beta / 2.0);
    });
    return es;
}

/// Profile that first checks admissibility of beta for this kernel.
inline EpsilonSequence epsilon_decay_profile(const AngularKernel& k, double beta, const std::vector<double>& grid,
                                             unsigned workers = 1) {
    (void)a_beta(k, beta);
    return epsilon_sequence(k, grid, beta, workers);
}

inline std::vector<double> doubling_grid(double lo, double hi) {
    std::vector<double> g;
    for (double q = lo; q <= hi * (1 + 1e-12); q *= 2) g.push_back(q);
    return g;
}

}  // namespace mlmom
