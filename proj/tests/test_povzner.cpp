#include <gtest/gtest.h>

#include <boost/math/quadrature/gauss.hpp>
#include <cmath>
#include <numbers>

#include "mlmom/povzner.hpp"

using namespace mlmom;
constexpr double kPi = std::numbers::pi;

namespace {

Vec random_unit_orthogonal(CounterStream& rs, const Vec& uhat) {
    Vec w(uhat.size());
    for (auto& x : w) x = rs.normal();
    return orthogonal_unit(uhat, w);
}

CollisionGeometry random_geometry(CounterStream& rs, int d = 3) {
    CollisionGeometry g;
    g.v = sample_velocity(rs, d);
    g.v_star = sample_velocity(rs, d);
    g.theta = rs.uniform(0.0, kPi);
    g.omega = random_unit_orthogonal(rs, g.uhat());
    return g;
}

// Composite Gauss-Legendre nodes: `panels` x 20 points on [a, b].
std::vector<std::pair<double, double>> composite_gauss(double a, double b, int panels) {
    using G = boost::math::quadrature::gauss<double, 20>;
    std::vector<std::pair<double, double>> out;
    const auto& x = G::abscissa();
    const auto& w = G::weights();
    const double hpan = (b - a) / panels;
    for (int p = 0; p < panels; ++p) {
        const double c = a + (p + 0.5) * hpan, r = 0.5 * hpan;
        for (std::size_t i = 0; i < x.size(); ++i) {
            out.emplace_back(c + r * x[i], r * w[i]);
            if (x[i] != 0) out.emplace_back(c - r * x[i], r * w[i]);
        }
    }
    return out;
}

// Raw sphere quadrature of rho(theta) * Delta <v>^{rq} without any splitting.
template <class Rho>
double g_brute_force(Rho rho, double gamma, const Vec& v, const Vec& vs, double rq, double th_lo, int panels,
                     bool log_theta = false) {
    const auto phis = composite_gauss(0.0, 2 * kPi, panels);
    const auto ths = log_theta ? composite_gauss(std::log(th_lo), std::log(kPi), panels)
                               : composite_gauss(th_lo, kPi, panels);
    const double before = std::pow(bracket_sq(v), rq / 2) + std::pow(bracket_sq(vs), rq / 2);
    long double total = 0;
    for (auto [t, wt] : ths) {
        const double th = log_theta ? std::exp(t) : t;
        const double jac = log_theta ? th : 1.0;
        long double inner = 0;
        for (auto [ph, wp] : phis) {
            auto g = CollisionGeometry::make(v, vs, th, ph);
            auto pc = post_collision(g);
            inner += wp * (std::pow(bracket_sq(pc.v_prime), rq / 2) + std::pow(bracket_sq(pc.v_star_prime), rq / 2) - before);
        }
        total += wt * jac * rho(th) * inner;
    }
    return std::pow(vecops::norm(vecops::axpy(-1.0, vs, v)), gamma) * static_cast<double>(total);
}

double closed_form_rq4(double A2, double gamma, const Vec& v, const Vec& vs) {
    const double A = bracket_sq(v), B = bracket_sq(vs), h = vecops::cross_norm(v, vs);
    const int d = static_cast<int>(v.size());
    return std::pow(vecops::norm(vecops::axpy(-1.0, vs, v)), gamma) * A2 *
           (2 * h * h / (d - 1) - 0.5 * (A - B) * (A - B));
}

}  // namespace

TEST(Philox, KnownAnswerVectors) {
    using C = Philox4x32::ctr_type;
    using K = Philox4x32::key_type;
    EXPECT_EQ(Philox4x32::block(C{0, 0, 0, 0}, K{0, 0}), (C{0x6627e8d5, 0xe169c58d, 0xbc57ac4c, 0x9b00dbd8}));
    EXPECT_EQ(Philox4x32::block(C{~0u, ~0u, ~0u, ~0u}, K{~0u, ~0u}),
              (C{0x408f276d, 0x41c83b0e, 0xa20bc7c6, 0x6d5451fd}));
    EXPECT_EQ(Philox4x32::block(C{0x243f6a88, 0x85a308d3, 0x13198a2e, 0x03707344}, K{0xa4093822, 0x299f31d0}),
              (C{0xd16cfe09, 0x94fdcceb, 0x5001e420, 0x24126ea1}));
}

TEST(Philox, StreamsAreAddressable) {
    CounterStream a(42, 1, 2), b(42, 1, 2), c(42, 1, 3);
    for (int i = 0; i < 10; ++i) {
        const double x = a.uniform();
        EXPECT_EQ(x, b.uniform());
        EXPECT_NE(x, c.uniform());
        EXPECT_GT(x, 0.0);
        EXPECT_LT(x, 1.0);
    }
}

TEST(Geometry, HeadOnReversal) {
    auto g = CollisionGeometry::make({1, 0, 0}, {-1, 0, 0}, kPi, 0.3);
    auto pc = post_collision(g);
    for (int i = 0; i < 3; ++i) {
        EXPECT_NEAR(pc.v_prime[i], (i == 0 ? -1.0 : 0.0), 1e-15);
        EXPECT_NEAR(pc.v_star_prime[i], (i == 0 ? 1.0 : 0.0), 1e-15);
    }
}

TEST(Geometry, IdentityScatteringAndZeroRelativeSpeed) {
    auto g = CollisionGeometry::make({0.3, -1.2, 2}, {1, 0.5, -0.7}, 0.0, 1.1);
    auto pc = post_collision(g);
    for (int i = 0; i < 3; ++i) {
        EXPECT_NEAR(pc.v_prime[i], g.v[i], 1e-15);
        EXPECT_NEAR(pc.v_star_prime[i], g.v_star[i], 1e-15);
    }
    CollisionGeometry same{{1, 2, 3}, {1, 2, 3}, 1.0, {0, 1, 0}};
    auto ps = post_collision(same);
    EXPECT_EQ(ps.v_prime, same.v);
    EXPECT_EQ(ps.v_star_prime, same.v_star);
}

TEST(Geometry, SpecifiedOmegaConservesMomentumAndEnergy) {
    CollisionGeometry g{{1, 1, 0}, {0, 0, 1}, kPi / 3, {}};
    const Vec uh = g.uhat();
    const Vec c = {1.0 * 1 - 0.0 * 0, 0.0 * 0 - 1 * 1, 1 * 0 - 1 * 0};  // v x v* = (1,-1,0)
    Vec w = {uh[1] * c[2] - uh[2] * c[1], uh[2] * c[0] - uh[0] * c[2], uh[0] * c[1] - uh[1] * c[0]};
    g.omega = vecops::scaled(1.0 / vecops::norm(w), w);
    EXPECT_NEAR(vecops::dot(g.omega, uh), 0.0, 1e-15);
    auto pc = post_collision(g);
    for (int i = 0; i < 3; ++i) EXPECT_NEAR(pc.v_prime[i] + pc.v_star_prime[i], g.v[i] + g.v_star[i], 1e-15);
    const double e0 = vecops::dot(g.v, g.v) + vecops::dot(g.v_star, g.v_star);
    const double e1 = vecops::dot(pc.v_prime, pc.v_prime) + vecops::dot(pc.v_star_prime, pc.v_star_prime);
    EXPECT_NEAR(e1, e0, 1e-12 * e0);
    EXPECT_NEAR(vecops::norm(vecops::axpy(-1.0, g.v, pc.v_prime)), vecops::norm(g.u()) * std::sin(g.theta / 2), 1e-14);
}

TEST(Geometry, RandomConservationAndDisplacement) {
    CounterStream rs(9, 1);
    for (int d : {2, 3})
        for (int i = 0; i < 2000; ++i) {
            auto g = random_geometry(rs, d);
            auto pc = post_collision(g);
            EXPECT_NEAR(vecops::norm(g.sigma()), 1.0, 1e-14);
            for (int k = 0; k < d; ++k)
                EXPECT_NEAR(pc.v_prime[k] + pc.v_star_prime[k], g.v[k] + g.v_star[k], 1e-12 * (1 + std::fabs(g.v[k])));
            const double e0 = bracket_sq(g.v) + bracket_sq(g.v_star);
            const double e1 = bracket_sq(pc.v_prime) + bracket_sq(pc.v_star_prime);
            EXPECT_NEAR(e1, e0, 1e-12 * e0);
            EXPECT_NEAR(vecops::norm(vecops::axpy(-1.0, g.v, pc.v_prime)), vecops::norm(g.u()) * std::sin(g.theta / 2),
                        1e-12 * (1 + vecops::norm(g.u())));
        }
}

TEST(EnergySplit, ReconstructsPostCollisionalEnergies) {
    CounterStream rs(10, 1);
    for (int d : {2, 3})
        for (int i = 0; i < 2000; ++i) {
            auto g = random_geometry(rs, d);
            auto pc = post_collision(g);
            auto sp = energy_split(g);
            const double a = bracket_sq(pc.v_prime), b = bracket_sq(pc.v_star_prime);
            EXPECT_NEAR(sp.E + sp.P, a, 1e-12 * (a + b));
            EXPECT_NEAR(sp.E_star - sp.P, b, 1e-12 * (a + b));
            EXPECT_NEAR(sp.E + sp.E_star, bracket_sq(g.v) + bracket_sq(g.v_star), 1e-12 * (a + b));
        }
}

TEST(EnergySplit, IdentityAtZeroAngleAndCollinearNullForm) {
    auto g = CollisionGeometry::make({1, 2, 0}, {-1, 0, 3}, 0.0, 0.4);
    auto sp = energy_split(g);
    EXPECT_NEAR(sp.E, bracket_sq(g.v), 1e-14);
    EXPECT_EQ(sp.P, 0.0);
    for (double th : {0.3, 1.0, 2.5})
        for (double ph : {0.0, 1.0, 2.0}) {
            auto c = CollisionGeometry::make({1, 2, -1}, {-2, -4, 2}, th, ph);
            EXPECT_EQ(energy_split(c).P, 0.0);
        }
}

TEST(EnergySplit, NullFormAveragesToZero) {
    CounterStream rs(12, 1);
    for (int rep = 0; rep < 5; ++rep) {
        auto g0 = random_geometry(rs);
        const int M = 10000;
        double s = 0, s2 = 0;
        for (int m = 0; m < M; ++m) {
            auto g = g0;
            g.omega = random_unit_orthogonal(rs, g.uhat());
            const double P = energy_split(g).P;
            s += P;
            s2 += P * P;
        }
        const double mean = s / M, sd = std::sqrt(s2 / M - mean * mean);
        EXPECT_LE(std::fabs(mean), 3 * sd / std::sqrt(M));
    }
}

TEST(MixedTerm, PrintedBoundHasCounterexample) {
    // v = (x,0,0), v* = (0,x,0), theta = pi/2, t = 1, omega = j: lhs 2x^2+1 vs rhs 1.5x^2+1.5
    for (double x : {2.0, 5.0}) {
        auto g = CollisionGeometry::make({x, 0, 0}, {0, x, 0}, kPi / 2, 0.0);
        auto r = mixed_term_check(g, 1.0);
        EXPECT_NEAR(r.lhs, 2 * x * x + 1, 1e-12 * x * x);
        EXPECT_NEAR(r.rhs, 1.5 * x * x + 1.5, 1e-12 * x * x);
        EXPECT_GT(r.lhs, r.rhs);
    }
    // but the unweighted energy never exceeds the total
    CounterStream rs(13, 1);
    for (int i = 0; i < 1000; ++i) {
        auto g = random_geometry(rs);
        auto r = mixed_term_check(g, rs.uniform());
        EXPECT_LE(r.lhs, bracket_sq(g.v) + bracket_sq(g.v_star) + 1e-12);
    }
}

TEST(GWeight, ConservedWeightAndZeroRelativeSpeed) {
    CollisionKernel k(1.0, AngularKernel::power_law(1.0));
    EXPECT_EQ(g_weight_direct(k, {1, 2, 3}, {-1, 0, 2}, 2.0, 1e-10).value, 0.0);
    EXPECT_EQ(g_weight_direct(k, {1, 2, 3}, {1, 2, 3}, 6.0, 1e-10).value, 0.0);
    EXPECT_THROW(g_weight_direct(k, {1, 2, 3}, {1, 2, 3}, -1.0, 1e-10), DomainError);
    EXPECT_THROW(g_weight_direct(k, {1, 2}, {1, 2}, 4.0, 1e-10), DomainError);
}

TEST(GWeight, BoundedKernelAgainstMillionNodeSphereQuadrature) {
    const double b0 = 1.0;
    CollisionKernel k(1.0, AngularKernel::grad_bounded(b0));
    const Vec v{1, 0, 0}, vs{0, 1, 0};
    const double ref = g_brute_force([&](double th) { return b0 * std::sin(th); }, 1.0, v, vs, 4.0, 0.0, 50);
    const auto g = g_weight_direct(k, v, vs, 4.0, 1e-10);
    EXPECT_NEAR(g.value, ref, 1e-9 * std::fabs(ref));
    // closed form sqrt(2) A_2 (h^2 - (A-B)^2/2) with h = 1, A = B
    EXPECT_NEAR(g.value, std::sqrt(2.0) * 8 * kPi / 3, 1e-9);
}

TEST(GWeight, NonIntegerOrderAgainstSphereQuadrature) {
    CollisionKernel k(0.7, AngularKernel::grad_bounded(0.3));
    CounterStream rs(14, 1);
    for (int i = 0; i < 6; ++i) {
        const Vec v = sample_velocity(rs, 3), vs = sample_velocity(rs, 3);
        for (double rq : {3.0, 9.4}) {
            const double ref = g_brute_force([](double th) { return 0.3 * std::sin(th); }, 0.7, v, vs, rq, 0.0, 12);
            const auto g = g_weight_direct(k, v, vs, rq, 1e-9 * std::fabs(ref) + 1e-12);
            EXPECT_NEAR(g.value, ref, 1e-8 * std::fabs(ref) + 1e-10) << rq;
        }
    }
}

TEST(GWeight, TruncatedKernelAgainstRawQuadrature) {
    CollisionKernel k(1.0, AngularKernel::truncated(1.0, 1e-2, 0.5));
    CounterStream rs(15, 1);
    for (int i = 0; i < 4; ++i) {
        const Vec v = sample_velocity(rs, 3), vs = sample_velocity(rs, 3);
        const double ref = g_brute_force([](double th) { return 0.5 * std::pow(th, -2.0); }, 1.0, v, vs, 6.0, 1e-2, 12, true);
        const auto g = g_weight_direct(k, v, vs, 6.0, 1e-9 * std::fabs(ref));
        EXPECT_NEAR(g.value, ref, 1e-8 * std::fabs(ref));
    }
}

TEST(GWeight, ClosedFormAtRqFourForAllFamilies) {
    CounterStream rs(16, 1);
    for (auto ang : {AngularKernel::grad_bounded(1.0), AngularKernel::power_law(1.0), AngularKernel::power_law(1.8),
                     AngularKernel::truncated(1.5, 1e-3), AngularKernel::grad_bounded(1.0, 2)}) {
        CollisionKernel k(0.5, ang);
        const double A2 = a_beta(ang, 2.0).value;
        for (int i = 0; i < 30; ++i) {
            const Vec v = sample_velocity(rs, ang.d), vs = sample_velocity(rs, ang.d);
            const double cf = closed_form_rq4(A2, 0.5, v, vs);
            const double scale = A2 * std::pow(bracket_sq(v) + bracket_sq(vs), 2.0);
            EXPECT_NEAR(g_weight_direct(k, v, vs, 4.0, 1e-10 * scale).value, cf, 1e-9 * scale) << ang.name();
        }
    }
}

TEST(GWeight, PowerLawIsLimitOfTruncation) {
    const Vec v{0.4, -1.0, 2.0}, vs{1.5, 0.2, -0.3};
    const double tol = 1e-10 * std::pow(bracket_sq(v) + bracket_sq(vs), 4.7);
    const double g0 = g_weight_direct(CollisionKernel(1.0, AngularKernel::power_law(1.0)), v, vs, 9.4, tol).value;
    double prev = std::numeric_limits<double>::infinity();
    for (double tm : {1e-1, 1e-2, 1e-3, 1e-4}) {
        const double gt = g_weight_direct(CollisionKernel(1.0, AngularKernel::truncated(1.0, tm)), v, vs, 9.4, tol).value;
        const double diff = std::fabs(gt - g0);
        EXPECT_LT(diff, prev);
        prev = diff;
    }
    EXPECT_LT(prev, 1e-3 * std::fabs(g0));
}

TEST(GBound, ConsistencyCases) {
    CollisionKernel k(1.0, AngularKernel::power_law(1.0));
    auto eps = epsilon_sequence(k.angular, {2.0, 3.0, 4.7}, 2.0);
    const double A2 = a_beta(k.angular, 2.0).value;
    // at rq = 2 the loss and gain cancel and the mixed term carries p - 1 = 0
    EXPECT_NEAR(g_weight_bound(A2, 0.7, 1.0, {1, -2, 0.5}, {0.3, 0.1, 4}, 2.0), 0.0, 1e-10);
    EXPECT_EQ(g_weight_bound(k, eps, {0, 0, 0}, {0, 0, 0}, 6.0), 0.0);
    EXPECT_THROW(g_weight_bound(k, eps, {1, 0, 0}, {0, 1, 0}, 1.5), DomainError);
    EXPECT_THROW(g_weight_bound(k, eps, {1, 0, 0}, {0, 1, 0}, 12.0), DomainError);  // eps_6 not tabulated
}

TEST(GBound, PrintedBoundViolatedOnExplicitConfiguration) {
    // v = (3,0,0), v* = 0, hard spheres: G = -121.5 A_2 while the printed bound is -183 A_2.
    CollisionKernel k(1.0, AngularKernel::grad_bounded(1.0));
    const double A2 = 8 * kPi / 3;
    auto eps = epsilon_sequence(k.angular, {2.0}, 2.0);
    const Vec v{3, 0, 0}, vs{0, 0, 0};
    const double g = g_weight_direct(k, v, vs, 4.0, 1e-8).value;
    EXPECT_NEAR(g, -121.5 * A2, 1e-7);
    EXPECT_NEAR(g_weight_bound(k, eps, v, vs, 4.0), -183.0 * A2, 1e-7);
    EXPECT_GT(g, g_weight_bound(k, eps, v, vs, 4.0));
    EXPECT_LE(g, g_weight_bound(k, eps, v, vs, 4.0, BoundForm::halved_loss));
}

TEST(GBound, HalvedLossFormDominatesOnSamples) {
    PovznerSweepConfig cfg;
    cfg.kernel = CollisionKernel(1.0, AngularKernel::power_law(1.0));
    cfg.configurations = 150;
    cfg.seed = 77;
    for (const auto& row : povzner_sweep(cfg)) EXPECT_LE(row.direct, row.bound_halved + row.direct_err) << row.rq;
}

TEST(GBound, SweepIsIndependentOfWorkerCount) {
    PovznerSweepConfig cfg;
    cfg.kernel = CollisionKernel(0.5, AngularKernel::grad_bounded(1.0));
    cfg.configurations = 40;
    auto a = povzner_sweep(cfg);
    cfg.workers = 4;
    auto b = povzner_sweep(cfg);
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        EXPECT_EQ(a[i].direct, b[i].direct);
        EXPECT_EQ(a[i].bound, b[i].bound);
    }
}

TEST(ConvexBinomial, DegenerateCases) {
    for (double p : {0.3, 1.0, 2.0, 3.7}) {
        auto r = convex_binomial_gap(2.5, 0.7, 0.0, p);
        EXPECT_NEAR(r.lhs, 0.0, 1e-14);
        EXPECT_NEAR(r.rhs, 0.0, 1e-14);
        auto e = convex_binomial_gap(1.9, 1.9, 0.37, p);
        EXPECT_NEAR(e.lhs, 0.0, 1e-13);
        EXPECT_NEAR(e.rhs, 0.0, 1e-13);
    }
    EXPECT_THROW(convex_binomial_gap(1, 1, 0.5, 1.5), DomainError);
    EXPECT_THROW(convex_binomial_gap(-1, 1, 0.5, 2.0), DomainError);
    EXPECT_THROW(convex_binomial_gap(1, 1, 1.5, 2.0), DomainError);
}

TEST(ConvexBinomial, PropertySweep) {
    CounterStream rs(18, 1);
    const double ps[] = {0.3, 1.0, 2.0, 3.7, 8.0};
    long violations = 0;
    for (int i = 0; i < 100000; ++i) {
        const double a = rs.uniform(0, 10), b = rs.uniform(0, 10), t = rs.uniform(), p = ps[i % 5];
        auto r = convex_binomial_gap(a, b, t, p);
        if (r.lhs > r.rhs + 1e-12 * (1 + std::fabs(r.rhs))) ++violations;
    }
    EXPECT_EQ(violations, 0);
}
