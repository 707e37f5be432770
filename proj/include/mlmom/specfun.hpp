#pragma once

#include <cfloat>
#include <cmath>
#include <complex>
#include <limits>
#include <numbers>
#include <string>

#include "errors.hpp"
#include "numerics.hpp"

namespace mlmom {

/// Tail order s, ML parameter a = 2/s and rate alpha. Only s is stored.
class MLSpec {
public:
    MLSpec(double s, double alpha) : s_(s), alpha_(alpha) {
        if (!(s > 0.0 && s <= 2.0)) throw DomainError("MLSpec: tail order s must lie in (0,2]");
        if (!(alpha > 0.0)) throw DomainError("MLSpec: rate alpha must be positive");
    }
    static MLSpec from_a(double a, double alpha) {
        if (!(a >= 1.0)) throw DomainError("MLSpec: a must be >= 1");
        return MLSpec(2.0 / a, alpha);
    }
    double s() const { return s_; }
    double a() const { return 2.0 / s_; }
    double alpha() const { return alpha_; }
    MLSpec with_alpha(double alpha) const { return MLSpec(s_, alpha); }

private:
    double s_;
    double alpha_;
};

/// Angular integrability exponent required downstream for propagation of order s.
inline double beta_for_order(double s) {
    if (!(s > 0.0 && s < 2.0)) throw DomainError("beta_for_order: s must lie in (0,2)");
    return s <= 1.0 ? 2.0 : 4.0 / s - 2.0;
}

namespace detail {

// Stirling series for log Gamma(x), x >= 15. Coefficients B_{2k}/(2k(2k-1)).
inline real_ext lgamma_stirling(real_ext x) {
    static constexpr real_ext c[] = {
        1.0L / 12.0L,         -1.0L / 360.0L,     1.0L / 1260.0L,
        -1.0L / 1680.0L,      1.0L / 1188.0L,     -691.0L / 360360.0L,
        1.0L / 156.0L,        -3617.0L / 122400.0L};
    constexpr real_ext half_log_2pi = 0.918938533204672741780329736405617639861L;
    const real_ext inv = 1.0L / x;
    const real_ext inv2 = inv * inv;
    real_ext series = 0, p = inv;
    for (real_ext ck : c) {
        series += ck * p;
        p *= inv2;
    }
    return (x - 0.5L) * std::log(x) - x + half_log_2pi + series;
}

inline constexpr real_ext kShift = 15.0L;

}  // namespace detail

/// log Gamma(x) for x > 0, in extended precision.
inline real_ext log_gamma_ext(real_ext x) {
    if (!(x > 0)) throw DomainError("log_gamma: argument must be positive");
    if (x == 1 || x == 2) return 0;
    if (x >= detail::kShift) return detail::lgamma_stirling(x);
    real_ext prod = 1;
    while (x < detail::kShift) {
        prod *= x;
        x += 1;
    }
    return detail::lgamma_stirling(x) - std::log(prod);
}

inline double log_gamma_fn(double x) { return static_cast<double>(log_gamma_ext(x)); }

/// Gamma(x) for x > 0; throws OverflowError past the double range.
inline double gamma_fn(double x) {
    if (!(x > 0)) throw DomainError("gamma: argument must be positive");
    constexpr double kMax = 171.62437695630271;
    if (x > kMax) throw OverflowError("gamma: result exceeds double range", kMax);
    real_ext y = x, prod = 1;
    while (y < detail::kShift) {
        prod *= y;
        y += 1;
    }
    return static_cast<double>(std::exp(detail::lgamma_stirling(y)) / prod);
}

inline real_ext log_beta_ext(real_ext x, real_ext y) {
    if (!(x > 0 && y > 0)) throw DomainError("beta: arguments must be positive");
    return log_gamma_ext(x) + log_gamma_ext(y) - log_gamma_ext(x + y);
}

inline double beta_fn(double x, double y) { return static_cast<double>(std::exp(log_beta_ext(x, y))); }

struct MLEvaluation {
    real_ext log_value;
    bool asymptotic;
    long terms;
};

namespace detail {

inline constexpr long kMaxSeriesTerms = 20000;
inline constexpr real_ext kSeriesTol = 1e-12L;

// log of the exponential part of the large-x expansion plus the algebraic correction.
inline real_ext ml_asymptotic_log(real_ext a, real_ext x) {
    const real_ext r = std::pow(x, 1.0L / a);
    std::complex<real_ext> corr = 0;
    const long nmax = static_cast<long>(std::floor(a / 2.0L));
    for (long n = 1; n <= nmax; ++n) {
        const real_ext ph = 2 * std::numbers::pi_v<real_ext> * n / a;
        if (std::fabs(ph) >= std::numbers::pi_v<real_ext>) continue;
        const std::complex<real_ext> z = r * std::polar(1.0L, ph);
        corr += 2.0L * std::exp(z - r).real();
    }
    // Dominant term (1/a) e^{r}; the others and the x^{-k} series are relatively tiny here.
    return r - std::log(a) + std::log1p(corr.real());
}

}  // namespace detail

/// Mittag-Leffler E_a(x) in log form: truncated series with a rigorous log-concave
/// tail bound, switching to the exponential asymptotic when the bound cannot be met.
inline MLEvaluation log_mittag_leffler_eval(double a_in, double x_in) {
    if (!(a_in >= 1.0)) throw DomainError("mittag_leffler: a must be >= 1");
    if (!(x_in >= 0.0)) throw DomainError("mittag_leffler: x must be nonnegative");
    if (x_in == 0.0) return {0, false, 1};
    const real_ext a = a_in, x = x_in, lx = std::log(x);
    auto log_term = [&](long q) { return q * lx - log_gamma_ext(a * q + 1); };

    LogSumAccumulator acc;
    acc.add(log_term(0));
    for (long q = 1; q <= detail::kMaxSeriesTerms; ++q) {
        const real_ext cur = log_term(q);
        acc.add(cur);
        const real_ext next = log_term(q + 1);
        const real_ext log_ratio = next - cur;  // decreasing in q
        if (log_ratio < 0) {
            // sum_{k>q} t_k <= t_{q+1} / (1 - t_{q+2}/t_{q+1})
            const real_ext lr2 = log_term(q + 2) - next;
            const real_ext log_tail = next - std::log1p(-std::exp(lr2));
            if (log_tail - acc.log_value() < std::log(detail::kSeriesTol) - 10) {
                acc.add(next);
                return {acc.log_value(), false, q + 2};
            }
        }
    }
    return {detail::ml_asymptotic_log(a, x), true, 0};
}

inline double log_mittag_leffler(double a, double x) {
    return static_cast<double>(log_mittag_leffler_eval(a, x).log_value);
}

inline double mittag_leffler(double a, double x) {
    const real_ext lv = log_mittag_leffler_eval(a, x).log_value;
    const real_ext limit = std::log(static_cast<real_ext>(DBL_MAX));
    if (lv > limit) {
        // threshold on x where log E_a(x) ~ x^{1/a} reaches log(DBL_MAX)
        const double thr = static_cast<double>(std::pow(limit + std::log(static_cast<real_ext>(a)), a));
        throw OverflowError("mittag_leffler: result exceeds double range (x threshold ~ " +
                                std::to_string(thr) + ")",
                            thr);
    }
    return static_cast<double>(std::exp(lv));
}

}  // namespace mlmom
