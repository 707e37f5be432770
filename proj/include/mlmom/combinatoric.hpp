#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "errors.hpp"
#include "numerics.hpp"
#include "parallel.hpp"
#include "quadrature.hpp"
#include "specfun.hpp"

namespace mlmom {

struct BetaSumRecord {
    int q = 0;
    double param = 0;  // a for the first sum, s for the second
    double sum = 0;
    double log_sum = 0;
    double normalized = 0;  // sum (aq)^{1+a}, or sum q^3
};

/// sum_{k=1}^{k_q} C(q-2, k-1) B(ak+1, a(q-k)+1), accumulated in log space.
inline BetaSumRecord beta_sum_A4(int q, double a) {
    if (q < 3) throw DomainError("beta_sum_A4: q >= 3 required");
    if (!(a > 0)) throw DomainError("beta_sum_A4: a must be positive");
    LogSumAccumulator acc;
    const long kq = k_index(q);
    for (long k = 1; k <= kq; ++k) {
        const auto lb = log_binom_real(q - 2, static_cast<int>(k - 1));
        acc.add(lb.log_abs + log_beta_ext(a * k + 1, a * (q - k) + 1));
    }
    BetaSumRecord r;
    r.q = q;
    r.param = a;
    r.log_sum = static_cast<double>(acc.log_value());
    r.sum = std::exp(r.log_sum);
    r.normalized = std::exp(r.log_sum + (1 + a) * std::log(a * q));
    return r;
}

/// sum_{k=1}^{1 + k_{q/2 - 2/s}} C(q/2 - 2/s, k-1) B(2k+1, q-2k+1); empty (zero) when q/2 < 2/s.
inline BetaSumRecord beta_sum_A5(int q, double s) {
    if (q < 3) throw DomainError("beta_sum_A5: q >= 3 required");
    if (!(s > 0 && s <= 1)) throw DomainError("beta_sum_A5: s must lie in (0,1]");
    BetaSumRecord r;
    r.q = q;
    r.param = s;
    const double top = q / 2.0 - 2.0 / s;
    if (top < 0) {
        r.log_sum = -std::numeric_limits<double>::infinity();
        return r;
    }
    LogSumAccumulator acc;
    const long upper = 1 + k_index(top);
    for (long k = 1; k <= upper; ++k) {
        const auto lb = log_binom_real(top, static_cast<int>(k - 1));
        if (lb.sign <= 0) throw DomainError("beta_sum_A5: nonpositive binomial coefficient");
        acc.add(lb.log_abs + log_beta_ext(2.0L * k + 1, q - 2.0L * k + 1));
    }
    r.log_sum = static_cast<double>(acc.log_value());
    r.sum = std::exp(r.log_sum);
    r.normalized = r.sum * std::pow(static_cast<double>(q), 3);
    return r;
}

/// Normalized ratios on a sweep; max/min and monotone tail summarize the slice.
struct SliceSummary {
    std::vector<BetaSumRecord> rows;
    double max_over_min = 0;
    bool nonincreasing_tail = true;  // nonincreasing for q >= from_q (nonzero rows only)
    int first_increase_q = -1;       // last q >= from_q where the ratio went up
};

inline SliceSummary summarize_slice(std::vector<BetaSumRecord> rows, int from_q = 32) {
    SliceSummary s;
    double mx = 0, mn = std::numeric_limits<double>::infinity();
    const BetaSumRecord* prev = nullptr;
    for (const auto& r : rows) {
        if (r.sum <= 0) continue;
        mx = std::max(mx, r.normalized);
        mn = std::min(mn, r.normalized);
        if (prev && prev->q >= from_q && r.normalized > prev->normalized * (1 + 1e-13)) {
            s.nonincreasing_tail = false;
            s.first_increase_q = r.q;
        }
        prev = &r;
    }
    s.max_over_min = mn > 0 && std::isfinite(mn) ? mx / mn : std::numeric_limits<double>::infinity();
    s.rows = std::move(rows);
    return s;
}

inline SliceSummary sweep_A4(double a, int q_lo, int q_hi, unsigned workers = 1, int from_q = 32) {
    std::vector<BetaSumRecord> rows(q_hi - q_lo + 1);
    parallel_for(rows.size(), workers, [&](std::size_t i) { rows[i] = beta_sum_A4(q_lo + static_cast<int>(i), a); });
    return summarize_slice(std::move(rows), from_q);
}

inline SliceSummary sweep_A5(double s, int q_lo, int q_hi, unsigned workers = 1, int from_q = 32) {
    std::vector<BetaSumRecord> rows(q_hi - q_lo + 1);
    parallel_for(rows.size(), workers, [&](std::size_t i) { rows[i] = beta_sum_A5(q_lo + static_cast<int>(i), s); });
    return summarize_slice(std::move(rows), from_q);
}

struct LaplaceRow {
    int q;
    double integral, ratio;
};

struct LaplaceReport {
    double a;
    std::vector<LaplaceRow> rows;
    bool cauchy_shrinking = true;  // |r_{i+1} - r_i| decreasing along the grid
};

/// int_0^{1/2} x^a g(x) e^{q S(x)} dx against Gamma(a+1) (aq)^{-(a+1)}, with
/// g = (1-x)^a (x^a + (1-x)^a)^{-2} and S = log(x^a + (1-x)^a).
inline LaplaceReport laplace_asymptotic_check(double a, const std::vector<int>& q_grid) {
    if (!(a > 1)) throw DomainError("laplace_asymptotic_check: a > 1 required");
    LaplaceReport rep{a, {}, true};
    for (int q : q_grid) {
        auto f = [&](double x) {
            if (x <= 0) return 0.0;
            const double xa = std::pow(x, a), ya = std::pow(1 - x, a), base = xa + ya;
            return std::exp(a * std::log(x) + a * std::log1p(-x) - 2 * std::log(base) + q * std::log(base));
        };
        std::vector<double> br;
        const double scale = 1.0 / (a * q);
        for (double m : {1.0, 4.0, 16.0, 64.0})
            if (m * scale < 0.5) br.push_back(m * scale);
        QuadOptions opt;
        opt.rel_tol = 1e-12;
        auto r = integrate(f, 0.0, 0.5, opt, br);
        require_converged(r, 1e-9 * r.value, "laplace_asymptotic_check");
        const double ref = std::exp(log_gamma_fn(a + 1) - (a + 1) * std::log(a * q));
        rep.rows.push_back({q, r.value, r.value / ref});
    }
    for (std::size_t i = 2; i < rep.rows.size(); ++i) {
        const double d1 = std::fabs(rep.rows[i - 1].ratio - rep.rows[i - 2].ratio);
        const double d2 = std::fabs(rep.rows[i].ratio - rep.rows[i - 1].ratio);
        if (d2 > d1) rep.cauchy_shrinking = false;
    }
    return rep;
}

/// S(x) = log(x^a + (1-x)^a), the Laplace phase.
inline double laplace_phase(double a, double x) { return std::log(std::pow(x, a) + std::pow(1 - x, a)); }

/// x^a y^{s-a} + x^{s-a} y^a <= x^b y^{s-b} + x^{s-b} y^b for b <= a <= s/2.
inline bool poly_inequality_A1(double x, double y, double a, double b, double s) {
    if (!(b <= a && a <= s / 2)) throw DomainError("poly_inequality_A1: requires b <= a <= s/2");
    if (!(x >= 0 && y >= 0)) throw DomainError("poly_inequality_A1: x, y must be nonnegative");
    auto pw = [](double base, double e) { return (base == 0 && e == 0) ? 1.0 : std::pow(base, e); };
    const double lhs = pw(x, a) * pw(y, s - a) + pw(x, s - a) * pw(y, a);
    const double rhs = pw(x, b) * pw(y, s - b) + pw(x, s - b) * pw(y, b);
    return lhs <= rhs + 1e-12 * std::max({1.0, std::fabs(lhs), std::fabs(rhs)});
}

struct BinomialChain {
    double lower, mid, upper;
    double full_sum;  // sum from k = 0 to k_p
    bool chain_holds(double rel = 1e-12) const {
        const double sc = std::max({std::fabs(lower), std::fabs(mid), std::fabs(upper)});
        return lower <= mid + rel * sc && mid <= upper + rel * sc;
    }
};

/// Truncated binomial sums around (x+y)^p - x^p - y^p for real p > 1.
inline BinomialChain poly_inequality_A2(double x, double y, double p) {
    if (!(p > 1)) throw DomainError("poly_inequality_A2: p > 1 required");
    if (!(x > 0 && y > 0)) throw DomainError("poly_inequality_A2: x, y must be positive");
    const long kp = k_index(p);
    auto term = [&](long k) {
        return static_cast<double>(binom_real(p, static_cast<int>(k))) *
               (std::pow(x, k) * std::pow(y, p - k) + std::pow(x, p - k) * std::pow(y, k));
    };
    CompensatedSum<> lo, up, full;
    full += term(0);
    for (long k = 1; k <= kp; ++k) {
        const double t = term(k);
        if (k <= kp - 1) lo += t;
        up += t;
        full += t;
    }
    const double mid = std::pow(x + y, p) - std::pow(x, p) - std::pow(y, p);
    return {static_cast<double>(lo.value()), mid, static_cast<double>(up.value()), static_cast<double>(full.value())};
}

/// Index k_{q*} = floor(q/4 - 1/gamma + 3/2) used by the generation sums.
inline long k_q_star(double q, double gamma) { return static_cast<long>(std::floor(q / 4.0 - 1.0 / gamma + 1.5)); }

}  // namespace mlmom
