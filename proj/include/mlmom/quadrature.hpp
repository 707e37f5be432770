#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <queue>
#include <vector>

#include "errors.hpp"
#include "numerics.hpp"

namespace mlmom {

struct QuadResult {
    double value = 0.0;
    double error = 0.0;
    int evaluations = 0;
    bool converged = true;

    QuadResult& operator+=(const QuadResult& o) {
        value += o.value;
        error += o.error;
        evaluations += o.evaluations;
        converged = converged && o.converged;
        return *this;
    }
};

struct QuadOptions {
    double abs_tol = 0.0;
    double rel_tol = 1e-11;
    int max_intervals = 4000;
};

namespace detail {

// 21-point Kronrod extension of the 10-point Gauss rule (QUADPACK qk21 tables).
inline constexpr std::array<double, 11> kXgk = {
    0.995657163025808080735527280689003, 0.973906528517171720077964012084452,
    0.930157491355708226001207180059508, 0.865063366688984510732096688423493,
    0.780817726586416897063717578345042, 0.679409568299024406234327365114874,
    0.562757134668604683339000099272694, 0.433395394129247190799265943165784,
    0.294392862701460198131126603103866, 0.148874338981631210884826001129720,
    0.000000000000000000000000000000000};
inline constexpr std::array<double, 11> kWgk = {
    0.011694638867371874278064396062192, 0.032558162307964727478818972459390,
    0.054755896574351996031381300244580, 0.075039674810919952767043140916190,
    0.093125454583697605535065465083366, 0.109387158802297641899210590325805,
    0.123491976262065851077208563245081, 0.134709217311473325928054001771707,
    0.142775938577060080797094273138717, 0.147739104901338491374841515972068,
    0.149445554002916905664936468389821};
inline constexpr std::array<double, 5> kWg = {
    0.066671344308688137593568809893332, 0.149451349150580593145776339657697,
    0.219086362515982043995534934228163, 0.269266719309996355091226921569469,
    0.295524224714752870173892994651338};

struct Segment {
    double a, b, value, error;
    bool operator<(const Segment& o) const { return error < o.error; }
};

template <class F>
Segment gk21(F& f, double a, double b) {
    const double c = 0.5 * (a + b), h = 0.5 * (b - a);
    const double fc = f(c);
    real_ext kron = fc * kWgk[10];
    real_ext gauss = 0;
    for (int j = 0; j < 10; ++j) {
        const double dx = h * kXgk[j];
        const double s = static_cast<double>(f(c - dx)) + static_cast<double>(f(c + dx));
        kron += kWgk[j] * s;
        if (j % 2 == 1) gauss += kWg[j / 2] * s;
    }
    const double k = static_cast<double>(kron * h);
    const double g = static_cast<double>(gauss * h);
    double err = std::fabs(k - g);
    // qk21-style rescaling is too optimistic for the smooth-but-wide integrands here,
    // so the raw Gauss/Kronrod gap is kept, floored at rounding level.
    err = std::max(err, 50 * std::numeric_limits<double>::epsilon() * std::fabs(k));
    return {a, b, k, err};
}

}  // namespace detail

/// Globally adaptive Gauss-Kronrod integration over [a, b] with optional interior breakpoints.
template <class F>
QuadResult integrate(F&& f, double a, double b, const QuadOptions& opt = {},
                     std::vector<double> breaks = {}) {
    QuadResult out;
    if (a == b) return out;
    double sign = 1.0;
    if (b < a) {
        std::swap(a, b);
        sign = -1.0;
    }
    breaks.erase(std::remove_if(breaks.begin(), breaks.end(),
                                [&](double x) { return !(x > a && x < b); }),
                 breaks.end());
    std::sort(breaks.begin(), breaks.end());
    breaks.insert(breaks.begin(), a);
    breaks.push_back(b);

    std::priority_queue<detail::Segment> heap;
    real_ext total = 0, total_err = 0;
    for (std::size_t i = 0; i + 1 < breaks.size(); ++i) {
        auto s = detail::gk21(f, breaks[i], breaks[i + 1]);
        out.evaluations += 21;
        total += s.value;
        total_err += s.error;
        heap.push(s);
    }
    auto done = [&] {
        double tol = std::max(opt.abs_tol, opt.rel_tol * std::fabs(static_cast<double>(total)));
        return static_cast<double>(total_err) <= tol;
    };
    while (!done()) {
        if (static_cast<int>(heap.size()) >= opt.max_intervals) {
            out.converged = false;
            break;
        }
        auto worst = heap.top();
        heap.pop();
        const double mid = 0.5 * (worst.a + worst.b);
        if (!(mid > worst.a && mid < worst.b)) {
            out.converged = false;
            heap.push(worst);
            break;
        }
        auto l = detail::gk21(f, worst.a, mid);
        auto r = detail::gk21(f, mid, worst.b);
        out.evaluations += 42;
        total += (l.value + r.value) - worst.value;
        total_err += (l.error + r.error) - worst.error;
        heap.push(l);
        heap.push(r);
    }
    // Recompute from the leaves so cancellation in the running totals cannot leak in.
    CompensatedSum<> v, e;
    while (!heap.empty()) {
        v += heap.top().value;
        e += heap.top().error;
        heap.pop();
    }
    out.value = sign * static_cast<double>(v.value());
    out.error = static_cast<double>(e.value());
    return out;
}

/// Integral over [lo, hi] (0 < lo < hi) in the variable x = log(theta); suited to
/// integrands with algebraic behaviour near the left end.
template <class F>
QuadResult integrate_log(F&& f, double lo, double hi, const QuadOptions& opt = {}) {
    auto g = [&](double x) {
        const double th = std::exp(x);
        return f(th) * th;
    };
    const double a = std::log(lo), b = std::log(hi);
    std::vector<double> br;
    const int pieces = std::max(1, static_cast<int>(std::ceil((b - a) / 2.0)));
    for (int i = 1; i < pieces; ++i) br.push_back(a + (b - a) * i / pieces);
    return integrate(g, a, b, opt, br);
}

inline void require_converged(const QuadResult& r, double tol, const char* what) {
    if (!r.converged || r.error > tol)
        throw ToleranceError(std::string(what) + ": quadrature tolerance not met", r.error);
}

}  // namespace mlmom
