#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "errors.hpp"
#include "kernels.hpp"
#include "moments.hpp"
#include "numerics.hpp"
#include "parallel.hpp"
#include "rng.hpp"

namespace mlmom {

struct InitialCondition {
    enum class Family { maxwellian, shifted_bimaxwellian, compact_support, heavy_tail };
    Family family = Family::maxwellian;
    int d = 3;
    double T = 1.0;                     // maxwellian
    double T1 = 1.0, T2 = 1.0, dv = 0;  // two maxwellians shifted by +-dv/2 along the first axis
    double R = 1.0;                     // uniform on the ball of radius R
    double s0 = 1.0, alpha0 = 0.5;      // density ~ exp(-alpha0 <v>^s0)

    static InitialCondition maxwellian(double T, int d = 3) {
        InitialCondition c;
        c.family = Family::maxwellian;
        c.T = T;
        c.d = d;
        return c;
    }
    static InitialCondition shifted_bimaxwellian(double T1, double T2, double dv, int d = 3) {
        InitialCondition c;
        c.family = Family::shifted_bimaxwellian;
        c.T1 = T1;
        c.T2 = T2;
        c.dv = dv;
        c.d = d;
        return c;
    }
    static InitialCondition compact_support(double R, int d = 3) {
        InitialCondition c;
        c.family = Family::compact_support;
        c.R = R;
        c.d = d;
        return c;
    }
    static InitialCondition heavy_tail(double s0, double alpha0, int d = 3) {
        InitialCondition c;
        c.family = Family::heavy_tail;
        c.s0 = s0;
        c.alpha0 = alpha0;
        c.d = d;
        return c;
    }

    std::string name() const {
        switch (family) {
            case Family::maxwellian: return "maxwellian";
            case Family::shifted_bimaxwellian: return "shifted_bimaxwellian";
            case Family::compact_support: return "compact_support";
            case Family::heavy_tail: return "heavy_tail";
        }
        return "?";
    }
};

namespace detail {

inline constexpr std::uint32_t kInitTag = 0xFFFFFFFFu;
inline constexpr std::uint32_t kPermTag = 0xFFFFFFFEu;

/// Inverse CDF table for the radial law r^{d-1} exp(-alpha0 <r>^s0).
class RadialTable {
public:
    RadialTable(double s0, double alpha0, int d) {
        auto logf = [&](double r) { return (d - 1) * std::log(r) - alpha0 * std::pow(1 + r * r, 0.5 * s0); };
        // the tail is cut where the log density has dropped 60 below its peak
        double peak = -INFINITY, r = 1e-3;
        for (; r < 1e8; r *= 1.01) peak = std::max(peak, logf(r));
        double rmax = 1.0;
        while (!(logf(rmax) < peak - 60 && rmax > 1)) rmax *= 1.05;
        const int n = 1 << 16;
        r_.resize(n + 1);
        cdf_.assign(n + 1, 0.0);
        for (int i = 0; i <= n; ++i) r_[i] = rmax * i / n;
        double prev = 0;
        for (int i = 1; i <= n; ++i) {
            const double cur = std::exp(logf(r_[i]) - peak);
            cdf_[i] = cdf_[i - 1] + 0.5 * (prev + cur);
            prev = cur;
        }
        for (auto& c : cdf_) c /= cdf_.back();
    }
    double sample(double u) const {
        const auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
        const std::size_t i = std::clamp<std::size_t>(it - cdf_.begin(), 1, cdf_.size() - 1);
        const double w = (u - cdf_[i - 1]) / std::max(1e-300, cdf_[i] - cdf_[i - 1]);
        return r_[i - 1] + std::clamp(w, 0.0, 1.0) * (r_[i] - r_[i - 1]);
    }

private:
    std::vector<double> r_, cdf_;
};

inline void unit_direction(CounterStream& rs, int d, double* out) {
    double n2 = 0;
    do {
        n2 = 0;
        for (int k = 0; k < d; ++k) {
            out[k] = rs.normal();
            n2 += out[k] * out[k];
        }
    } while (n2 < 1e-300);
    const double inv = 1.0 / std::sqrt(n2);
    for (int k = 0; k < d; ++k) out[k] *= inv;
}

}  // namespace detail

/// Draws N velocities; particle i uses its own stream, so the sample does not depend on threading.
inline std::vector<double> sample_initial(const InitialCondition& ic, std::size_t N, std::uint64_t seed,
                                          unsigned workers = 1) {
    const int d = ic.d;
    if (d != 2 && d != 3) throw DomainError("dsmc: only d in {2,3} supported");
    std::vector<double> v(N * d);
    std::optional<detail::RadialTable> table;
    if (ic.family == InitialCondition::Family::heavy_tail) {
        if (!(ic.s0 > 0 && ic.alpha0 > 0)) throw DomainError("heavy_tail: s0, alpha0 must be positive");
        table.emplace(ic.s0, ic.alpha0, d);
    }
    parallel_for(N, workers, [&](std::size_t i) {
        CounterStream rs(seed, detail::kInitTag, static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(i >> 32));
        double* x = &v[i * d];
        switch (ic.family) {
            case InitialCondition::Family::maxwellian:
                for (int k = 0; k < d; ++k) x[k] = std::sqrt(ic.T) * rs.normal();
                break;
            case InitialCondition::Family::shifted_bimaxwellian: {
                const bool first = (i % 2) == 0;
                const double sd = std::sqrt(first ? ic.T1 : ic.T2);
                for (int k = 0; k < d; ++k) x[k] = sd * rs.normal();
                x[0] += (first ? 0.5 : -0.5) * ic.dv;
                break;
            }
            case InitialCondition::Family::compact_support: {
                detail::unit_direction(rs, d, x);
                const double r = ic.R * std::pow(rs.uniform(), 1.0 / d);
                for (int k = 0; k < d; ++k) x[k] *= r;
                break;
            }
            case InitialCondition::Family::heavy_tail: {
                detail::unit_direction(rs, d, x);
                const double r = table->sample(rs.uniform());
                for (int k = 0; k < d; ++k) x[k] *= r;
                break;
            }
        }
    });
    return v;
}

/// Draws the deflection angle from rho on [theta_min, pi] by inversion.
class AngleSampler {
public:
    explicit AngleSampler(const AngularKernel& k) : k_(k) {
        if (k.singular()) throw DomainError("dsmc: singular kernels need a truncation angle");
        if (k.d != 2 && k.d != 3) throw DomainError("dsmc: only d in {2,3} supported");
        if (k.family == AngularKernel::Family::TruncatedSingular) {
            lo_ = std::pow(k.theta_min, -k.nu);
            hi_ = std::pow(std::numbers::pi, -k.nu);
        }
    }
    double operator()(double u) const {
        if (k_.family == AngularKernel::Family::TruncatedSingular)
            return std::pow(lo_ - u * (lo_ - hi_), -1.0 / k_.nu);
        // bounded b: sin theta density in d = 3, flat in d = 2
        if (k_.d == 3) return std::acos(std::clamp(1.0 - 2.0 * u, -1.0, 1.0));
        return std::numbers::pi * u;
    }

private:
    AngularKernel k_;
    double lo_ = 0, hi_ = 0;
};

/// Elastic update of (v, w) in place with deflection theta and azimuth phi about u = v - w.
inline void collide_pair(double* v, double* w, int d, double theta, double phi) {
    double u[3] = {0, 0, 0}, V[3] = {0, 0, 0};
    double un2 = 0;
    for (int k = 0; k < d; ++k) {
        u[k] = v[k] - w[k];
        V[k] = 0.5 * (v[k] + w[k]);
        un2 += u[k] * u[k];
    }
    if (un2 == 0) return;
    const double un = std::sqrt(un2);
    double uh[3] = {u[0] / un, u[1] / un, u[2] / un};
    double sigma[3] = {0, 0, 0};
    const double c = std::cos(theta), s = std::sin(theta);
    if (d == 2) {
        const double sgn = std::cos(phi) >= 0 ? 1.0 : -1.0;
        sigma[0] = c * uh[0] - sgn * s * uh[1];
        sigma[1] = c * uh[1] + sgn * s * uh[0];
    } else {
        // orthonormal frame around u-hat from the least aligned axis
        int ax = 0;
        for (int k = 1; k < 3; ++k)
            if (std::fabs(uh[k]) < std::fabs(uh[ax])) ax = k;
        double e1[3] = {0, 0, 0};
        e1[ax] = 1;
        const double p = uh[ax];
        for (int k = 0; k < 3; ++k) e1[k] -= p * uh[k];
        const double n1 = std::sqrt(e1[0] * e1[0] + e1[1] * e1[1] + e1[2] * e1[2]);
        for (double& x : e1) x /= n1;
        const double e2[3] = {uh[1] * e1[2] - uh[2] * e1[1], uh[2] * e1[0] - uh[0] * e1[2], uh[0] * e1[1] - uh[1] * e1[0]};
        const double cp = std::cos(phi), sp = std::sin(phi);
        for (int k = 0; k < 3; ++k) sigma[k] = c * uh[k] + s * (cp * e1[k] + sp * e2[k]);
    }
    for (int k = 0; k < d; ++k) {
        v[k] = V[k] + 0.5 * un * sigma[k];
        w[k] = V[k] - 0.5 * un * sigma[k];
    }
}

struct ParticleEnsemble {
    int d = 3;
    std::vector<double> v;  // N * d, row major
    double t = 0;
    std::uint64_t seed = 0;
    std::uint32_t step_index = 0;
    std::uint64_t collisions = 0;
    CollisionKernel kernel;

    std::size_t size() const { return v.size() / d; }
    const double* velocity(std::size_t i) const { return &v[i * d]; }
    double* velocity(std::size_t i) { return &v[i * d]; }

    double max_speed() const {
        double m = 0;
        for (std::size_t i = 0; i < size(); ++i) {
            double s = 0;
            for (int k = 0; k < d; ++k) s += v[i * d + k] * v[i * d + k];
            m = std::max(m, s);
        }
        return std::sqrt(m);
    }
    std::vector<double> momentum() const {
        std::vector<double> p(d, 0.0);
        CompensatedSum<> acc[3];
        for (std::size_t i = 0; i < size(); ++i)
            for (int k = 0; k < d; ++k) acc[k] += v[i * d + k];
        for (int k = 0; k < d; ++k) p[k] = static_cast<double>(acc[k].value()) / size();
        return p;
    }
    double energy() const {
        CompensatedSum<> acc;
        for (double x : v) acc += x * x;
        return static_cast<double>(acc.value()) / size();
    }
};

inline ParticleEnsemble make_ensemble(const InitialCondition& ic, const CollisionKernel& k, std::size_t N,
                                      std::uint64_t seed, unsigned workers = 1) {
    if (N < 1000) throw DomainError("dsmc: at least 1000 particles required");
    if (ic.d != k.d()) throw DomainError("dsmc: kernel and initial condition dimensions differ");
    AngleSampler{k.angular};  // rejects kernels without a finite collision rate
    ParticleEnsemble e;
    e.d = ic.d;
    e.seed = seed;
    e.kernel = k;
    e.v = sample_initial(ic, N, seed, workers);
    return e;
}

/// Collision frequency bound Lambda (2 max|v|)^gamma.
inline double collision_majorant(const ParticleEnsemble& e, double Lambda) {
    return Lambda * std::pow(2.0 * e.max_speed(), e.kernel.gamma);
}

struct StepStats {
    double majorant = 0;
    std::uint64_t collisions = 0;
};

/// One Nanbu-Babovsky round: random pairing, pair (i, j) collides with probability dt Lambda |u|^gamma.
inline StepStats step(ParticleEnsemble& e, double dt, unsigned workers = 1) {
    const double Lambda = total_rate(e.kernel.angular);
    const double maj = collision_majorant(e, Lambda);
    if (dt * maj > 0.1) throw DtTooLargeError("dsmc step: collision probability bound exceeds 0.1", maj);
    const std::size_t N = e.size();
    std::vector<std::uint32_t> perm(N);
    std::iota(perm.begin(), perm.end(), 0u);
    CounterStream pr(e.seed, e.step_index, detail::kPermTag);
    for (std::size_t i = N - 1; i > 0; --i) {
        const auto j = static_cast<std::size_t>((static_cast<std::uint64_t>(pr.next_u32()) * (i + 1)) >> 32);
        std::swap(perm[i], perm[j]);
    }
    const AngleSampler angle(e.kernel.angular);
    const std::size_t pairs = N / 2;
    std::vector<std::uint8_t> hit(pairs, 0);
    const int d = e.d;
    const double g = e.kernel.gamma;
    parallel_for(pairs, workers, [&](std::size_t p) {
        double* a = e.velocity(perm[2 * p]);
        double* b = e.velocity(perm[2 * p + 1]);
        double un2 = 0;
        for (int k = 0; k < d; ++k) un2 += (a[k] - b[k]) * (a[k] - b[k]);
        if (un2 == 0) return;
        CounterStream rs(e.seed, e.step_index, static_cast<std::uint32_t>(p), 1u);
        const double prob = dt * Lambda * std::pow(un2, 0.5 * g);
        if (rs.uniform() >= prob) return;
        const double theta = angle(rs.uniform());
        const double phi = 2 * std::numbers::pi * rs.uniform();
        collide_pair(a, b, d, theta, phi);
        hit[p] = 1;
    });
    StepStats st{maj, 0};
    for (auto h : hit) st.collisions += h;
    e.collisions += st.collisions;
    e.t += dt;
    ++e.step_index;
    return st;
}

/// Empirical moments (1/N) sum <v_i>^order with CLT standard errors, reduced over fixed blocks.
inline MomentSnapshot empirical_moments(const ParticleEnsemble& e, const std::vector<double>& orders,
                                        unsigned workers = 1) {
    constexpr std::size_t kBlock = 8192;
    const std::size_t N = e.size(), nb = (N + kBlock - 1) / kBlock;
    const std::size_t no = orders.size();
    // per block and order: log sum <v>^o and log sum <v>^{2o}
    std::vector<double> lsum(nb * no), lsum2(nb * no);
    parallel_for(nb, workers, [&](std::size_t b) {
        const std::size_t lo = b * kBlock, hi = std::min(N, lo + kBlock);
        std::vector<double> L(hi - lo);
        double Lmax = 0;
        for (std::size_t i = lo; i < hi; ++i) {
            double s = 1;
            for (int k = 0; k < e.d; ++k) s += e.v[i * e.d + k] * e.v[i * e.d + k];
            L[i - lo] = std::log(s);
            Lmax = std::max(Lmax, L[i - lo]);
        }
        for (std::size_t j = 0; j < no; ++j) {
            const double h = 0.5 * orders[j];
            double s1 = 0, s2 = 0;
            for (double x : L) {
                const double t1 = std::exp(h * (x - Lmax));
                s1 += t1;
                s2 += t1 * t1;
            }
            lsum[b * no + j] = h * Lmax + std::log(s1);
            lsum2[b * no + j] = 2 * h * Lmax + std::log(s2);
        }
    });
    MomentSnapshot snap;
    snap.t = e.t;
    const double logN = std::log(static_cast<double>(N));
    for (std::size_t j = 0; j < no; ++j) {
        LogSumAccumulator a1, a2;
        for (std::size_t b = 0; b < nb; ++b) {
            a1.add(lsum[b * no + j]);
            a2.add(lsum2[b * no + j]);
        }
        const double lm = static_cast<double>(a1.log_value()) - logN;
        const double lm2 = static_cast<double>(a2.log_value()) - logN;
        // Var X / m^2 = E X^2 / m^2 - 1
        const double rel_var = std::max(0.0, std::expm1(lm2 - 2 * lm));
        snap.set(orders[j], lm, std::exp(lm) * std::sqrt(rel_var / N));
    }
    return snap;
}

struct EntropyEstimate {
    double value = 0;  // -int f log f
    double std_error = 0;
};

/// Kozachenko-Leonenko 1-NN differential entropy on the first `subsample` particles.
inline EntropyEstimate knn_entropy(const ParticleEnsemble& e, std::size_t subsample = 4000, unsigned workers = 1) {
    const std::size_t M = std::min(subsample, e.size());
    if (M < 2) throw DomainError("knn_entropy: need at least two points");
    const int d = e.d;
    std::vector<double> logeps(M);
    parallel_for(M, workers, [&](std::size_t i) {
        double best = INFINITY;
        for (std::size_t j = 0; j < M; ++j) {
            if (j == i) continue;
            double s = 0;
            for (int k = 0; k < d; ++k) {
                const double x = e.v[i * d + k] - e.v[j * d + k];
                s += x * x;
            }
            best = std::min(best, s);
        }
        logeps[i] = 0.5 * std::log(std::max(best, 1e-300));
    });
    // psi(M) - psi(1) is the harmonic number H_{M-1}
    double harmonic = 0;
    for (std::size_t k = 1; k < M; ++k) harmonic += 1.0 / k;
    const double log_vd = 0.5 * d * std::log(std::numbers::pi) - std::lgamma(0.5 * d + 1);
    double mean = 0, sq = 0;
    for (double x : logeps) mean += x;
    mean /= M;
    for (double x : logeps) sq += (x - mean) * (x - mean);
    const double sd = std::sqrt(sq / (M - 1));
    return {harmonic + log_vd + d * mean, d * sd / std::sqrt(static_cast<double>(M))};
}

struct RunConfig {
    InitialCondition ic;
    CollisionKernel kernel;
    double horizon = 1.0;
    std::vector<double> snapshots;  // times in [0, horizon]
    std::vector<double> orders;
    std::size_t N = 100000;
    std::uint64_t seed = 1;
    unsigned workers = 1;
    double dt_max = 0.05;
    bool entropy = false;
    std::size_t entropy_subsample = 4000;
    std::optional<double> pair_budget;  // abort when the projected number of pair draws exceeds this
};

struct RunResult {
    MomentTrajectory trajectory;
    std::vector<EntropyEstimate> entropy;  // one per snapshot when requested
    std::uint64_t collisions = 0;
    std::uint64_t steps = 0;
    double energy_drift = 0;    // relative
    double momentum_drift = 0;  // absolute, max over components
};

/// Pair draws needed for the run at the initial step size, the budget measure.
inline double projected_pair_draws(const ParticleEnsemble& e, double horizon, double dt_max) {
    const double maj = collision_majorant(e, total_rate(e.kernel.angular));
    const double dt = std::min(dt_max, maj > 0 ? 0.1 / maj : dt_max);
    return std::ceil(horizon / dt) * static_cast<double>(e.size() / 2);
}

inline RunResult run(const RunConfig& cfg) {
    if (cfg.snapshots.empty()) throw UsageError("dsmc run: empty snapshot grid");
    std::vector<double> grid = cfg.snapshots;
    std::sort(grid.begin(), grid.end());
    if (grid.front() < 0 || grid.back() > cfg.horizon * (1 + 1e-12))
        throw UsageError("dsmc run: snapshots must lie in [0, horizon]");
    if (cfg.orders.empty()) throw UsageError("dsmc run: no moment orders requested");
    auto e = make_ensemble(cfg.ic, cfg.kernel, cfg.N, cfg.seed, cfg.workers);
    if (cfg.pair_budget) {
        const double need = projected_pair_draws(e, cfg.horizon, cfg.dt_max);
        if (need > *cfg.pair_budget)
            throw BudgetError("dsmc run: projected " + std::to_string(need) + " pair draws exceed budget " +
                              std::to_string(*cfg.pair_budget));
    }
    const double Lambda = total_rate(cfg.kernel.angular);
    const double E0 = e.energy();
    const auto P0 = e.momentum();
    RunResult out;
    out.trajectory.provenance = Provenance::simulated;
    for (double ts : grid) {
        while (e.t < ts - 1e-12 * std::max(1.0, ts)) {
            const double maj = collision_majorant(e, Lambda);
            double dt = std::min(cfg.dt_max, ts - e.t);
            if (maj > 0) dt = std::min(dt, 0.1 * (1 - 1e-9) / maj);
            step(e, dt, cfg.workers);
            ++out.steps;
        }
        e.t = ts;  // absorb rounding in the accumulated time
        out.trajectory.snapshots.push_back(empirical_moments(e, cfg.orders, cfg.workers));
        if (cfg.entropy) out.entropy.push_back(knn_entropy(e, cfg.entropy_subsample, cfg.workers));
    }
    out.collisions = e.collisions;
    out.energy_drift = std::fabs(e.energy() - E0) / E0;
    const auto P1 = e.momentum();
    for (int k = 0; k < e.d; ++k) out.momentum_drift = std::max(out.momentum_drift, std::fabs(P1[k] - P0[k]));
    return out;
}

struct TruncationLevel {
    double theta_min;
    double moment;  // m_order at the horizon
    double std_error;
    std::uint64_t collisions;
    double projected_pairs;
};

struct TruncationReport {
    double order = 4;
    std::vector<TruncationLevel> levels;
    std::vector<double> cauchy;  // |m(level i+1) - m(level i)|
    bool differences_shrink = true;
};

/// Runs the same data for decreasing truncation angles and compares the final moments.
inline TruncationReport truncation_study(const InitialCondition& ic, double gamma, double nu, double C,
                                         const std::vector<double>& theta_grid, double horizon, double order,
                                         std::size_t N, std::uint64_t seed, double pair_budget, unsigned workers = 1,
                                         bool bounded = false) {
    for (std::size_t i = 1; i < theta_grid.size(); ++i)
        if (!(theta_grid[i] < theta_grid[i - 1])) throw UsageError("truncation_study: theta_min grid must decrease");
    TruncationReport rep;
    rep.order = order;
    // budget is checked for every level before any work is done
    std::vector<double> projected;
    for (double th : theta_grid) {
        const auto ang = bounded ? AngularKernel::grad_bounded(C, ic.d) : AngularKernel::truncated(nu, th, C, ic.d);
        const auto e0 = make_ensemble(ic, CollisionKernel{gamma, ang}, N, seed, workers);
        projected.push_back(projected_pair_draws(e0, horizon, 0.05));
    }
    const double total = std::accumulate(projected.begin(), projected.end(), 0.0);
    if (total > pair_budget)
        throw BudgetError("truncation_study: projected " + std::to_string(total) + " pair draws exceed budget " +
                          std::to_string(pair_budget));
    for (std::size_t i = 0; i < theta_grid.size(); ++i) {
        RunConfig cfg;
        cfg.ic = ic;
        const auto ang =
            bounded ? AngularKernel::grad_bounded(C, ic.d) : AngularKernel::truncated(nu, theta_grid[i], C, ic.d);
        cfg.kernel = CollisionKernel{gamma, ang};
        cfg.horizon = horizon;
        cfg.snapshots = {horizon};
        cfg.orders = {order};
        cfg.N = N;
        cfg.seed = seed;
        cfg.workers = workers;
        auto r = run(cfg);
        const auto& s = r.trajectory.snapshots.back();
        rep.levels.push_back({theta_grid[i], s.moment(order), s.std_error.count(order) ? s.std_error.at(order) : 0.0,
                              r.collisions, projected[i]});
    }
    for (std::size_t i = 1; i < rep.levels.size(); ++i)
        rep.cauchy.push_back(std::fabs(rep.levels[i].moment - rep.levels[i - 1].moment));
    for (std::size_t i = 1; i < rep.cauchy.size(); ++i)
        if (rep.cauchy[i] >= rep.cauchy[i - 1]) rep.differences_shrink = false;
    return rep;
}

}  // namespace mlmom
