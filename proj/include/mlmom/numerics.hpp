#pragma once

#include <cmath>
#include <limits>
#include <vector>

#include "errors.hpp"

namespace mlmom {

using real_ext = long double;

/// Neumaier variant of Kahan summation.
template <class T = real_ext>
class CompensatedSum {
public:
    void add(T x) {
        T t = sum_ + x;
        if (std::fabs(sum_) >= std::fabs(x))
            comp_ += (sum_ - t) + x;
        else
            comp_ += (x - t) + sum_;
        sum_ = t;
    }
    CompensatedSum& operator+=(T x) {
        add(x);
        return *this;
    }
    T value() const { return sum_ + comp_; }

private:
    T sum_ = 0;
    T comp_ = 0;
};

/// Accumulates exp(l_i) without leaving log space.
class LogSumAccumulator {
public:
    void add(real_ext log_term) {
        if (log_term == -std::numeric_limits<real_ext>::infinity()) return;
        if (!started_) {
            max_ = log_term;
            sum_ = CompensatedSum<>{};
            sum_.add(1);
            started_ = true;
            return;
        }
        if (log_term <= max_) {
            sum_.add(std::exp(log_term - max_));
        } else {
            real_ext scale = std::exp(max_ - log_term);
            real_ext old = sum_.value() * scale;
            sum_ = CompensatedSum<>{};
            sum_.add(old);
            sum_.add(1);
            max_ = log_term;
        }
    }
    bool empty() const { return !started_; }
    real_ext log_value() const {
        if (!started_) return -std::numeric_limits<real_ext>::infinity();
        return max_ + std::log(sum_.value());
    }

private:
    bool started_ = false;
    real_ext max_ = 0;
    CompensatedSum<> sum_;
};

inline real_ext log_sum_exp(const std::vector<real_ext>& xs) {
    LogSumAccumulator acc;
    for (auto x : xs) acc.add(x);
    return acc.log_value();
}

/// Binomial coefficient C(a, k) for real a and integer k >= 0 by falling product.
inline real_ext binom_real(real_ext a, int k) {
    if (k < 0) return 0;
    real_ext r = 1;
    for (int i = 0; i < k; ++i) r *= (a - i) / (i + 1);
    return r;
}

/// log|C(a,k)| and its sign; sign 0 means the coefficient vanishes.
struct SignedLog {
    real_ext log_abs;
    int sign;
};

inline SignedLog log_binom_real(real_ext a, int k) {
    SignedLog out{0, 1};
    for (int i = 0; i < k; ++i) {
        real_ext f = (a - i) / (i + 1);
        if (f == 0) return {-std::numeric_limits<real_ext>::infinity(), 0};
        if (f < 0) out.sign = -out.sign;
        out.log_abs += std::log(std::fabs(f));
    }
    return out;
}

/// k_p = floor((p+1)/2), the split index used by the moment sums.
inline long k_index(double p) { return static_cast<long>(std::floor((p + 1.0) / 2.0)); }

/// <v>^2 = 1 + |v|^2.
template <class Vec>
double bracket_sq(const Vec& v) {
    double s = 1.0;
    for (auto x : v) s += static_cast<double>(x) * static_cast<double>(x);
    return s;
}

inline bool rel_close(double a, double b, double rtol, double atol = 0.0) {
    return std::fabs(a - b) <= atol + rtol * std::fmax(std::fabs(a), std::fabs(b));
}

}  // namespace mlmom
