#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "phaseseg/prox.hpp"

using namespace phaseseg;

namespace {
PotentialSplit unit_obstacle() {
    return make_obstacle(-1.0, 1.0, [](double r) { return -r; }, 1.0);
}
}  // namespace

TEST(Resolve, ObstacleIsProjection) {
    const auto r = resolve(unit_obstacle(), 0.1, 1.7);
    EXPECT_EQ(r.x, 1.0);
    EXPECT_NEAR(r.xi, 7.0, 1e-12);
    EXPECT_EQ(resolve(unit_obstacle(), 0.1, 0.25).x, 0.25);
    EXPECT_EQ(resolve(unit_obstacle(), 0.1, 0.25).xi, 0.0);
}

TEST(Resolve, DoubleWellExactRoot) {
    const auto r = resolve(make_double_well(), 1.0, 2.0);
    EXPECT_NEAR(r.x, 1.0, 1e-14);
    EXPECT_NEAR(r.xi, 1.0, 1e-13);
    EXPECT_LE(r.residual, 1e-12);
}

TEST(Resolve, LogarithmicOddSymmetryAtZero) {
    const auto r = resolve(make_logarithmic(2.0), 0.1, 0.0);
    EXPECT_EQ(r.x, 0.0);
    EXPECT_EQ(r.xi, 0.0);
}

TEST(Resolve, LogarithmicMatchesBisectionOracle) {
    // x + 0.1 ln((1+x)/(1-x)) = 3; 30-digit bisection gives 0.99999999587769293355...
    const auto r = resolve(make_logarithmic(2.0), 0.1, 3.0);
    EXPECT_NEAR(r.x, 0.9999999958776929, 1e-12);
    EXPECT_NEAR(r.x, oracle::log_resolvent(0.1, 3.0), 1e-12);
    EXPECT_NEAR(r.xi, 20.00000004122307, 1e-8);
    EXPECT_LT(r.x, 1.0);
}

TEST(Resolve, RejectsBadArguments) {
    EXPECT_THROW(resolve(make_double_well(), 0.0, 1.0), InvalidParameter);
    EXPECT_THROW(resolve(make_double_well(), 1.0, std::nan("")), InvalidParameter);
}

TEST(Resolve, ExtremeArgumentStaysInsideLogDomain) {
    const auto p = make_logarithmic(2.0);
    for (double r : {50.0, -50.0, 1e3}) {
        const auto res = resolve(p, 1e-3, r);
        EXPECT_TRUE(p.in_domain(res.x)) << r;
        EXPECT_TRUE(std::isfinite(res.xi));
    }
}

TEST(ResolveProperties, NonexpansiveMonotoneConfined) {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> tau_d(1e-3, 2.0), r_d(-3.0, 3.0);
    for (const auto& p : {make_logarithmic(2.0), make_double_well(), unit_obstacle()}) {
        for (int i = 0; i < 3000; ++i) {
            const double tau = tau_d(rng), r1 = r_d(rng), r2 = r_d(rng);
            const auto a = resolve(p, tau, r1, 1e-12), b = resolve(p, tau, r2, 1e-12);
            ASSERT_LE(std::abs(a.x - b.x), std::abs(r1 - r2) + 2e-12);
            if (r1 <= r2) {
                ASSERT_LE(a.x, b.x + 2e-12);
            }
            ASSERT_TRUE(p.beta_domain.closure_contains(a.x));
            if (p.kind == PotentialKind::logarithmic) {
                ASSERT_TRUE(p.in_domain(a.x));
            }
            // Roots closer to +-1 than the bracket gap are not representable; skip those.
            if (a.residual <= 1e-12 * std::max(1.0, std::abs(r1))) {
                ASSERT_TRUE(p.beta_contains(a.x, a.xi, 1e-9 * std::max(1.0, std::abs(a.xi)))) << r1 << ' ' << tau;
            }
        }
    }
}

TEST(ResolveProperties, SmallTauCloseToIdentity) {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> r_d(-0.99, 0.99);
    for (const auto& p : {make_logarithmic(2.0), make_double_well(), unit_obstacle()}) {
        for (double tau : {1e-1, 1e-3, 1e-6}) {
            for (int i = 0; i < 200; ++i) {
                const double r = r_d(rng);
                const auto res = resolve(p, tau, r);
                EXPECT_LE(std::abs(res.x - r), tau * std::abs(p.beta(r)) + 1e-12);
            }
        }
    }
}

TEST(ResolveProperties, ResidualWithinTolerance) {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> tau_d(0.05, 1.0), r_d(-1.5, 1.5);
    for (const auto& p : {make_logarithmic(2.0), make_double_well()}) {
        for (int i = 0; i < 1000; ++i) {
            const double tau = tau_d(rng), r = r_d(rng);
            const auto res = resolve(p, tau, r);
            EXPECT_LE(std::abs(res.x + tau * p.beta(res.x) - r), default_prox_tol(r) * 1.01) << r << ' ' << tau;
        }
    }
}

TEST(ResolveField, ObstacleThreeCells) {
    const Grid g = Grid::line(3, 3.0);
    const ScalarField r(g, {1.7, 0.0, -1.7});
    const auto out = resolve_field(unit_obstacle(), 0.1, r);
    EXPECT_EQ(out.x.values, (std::vector<double>{1.0, 0.0, -1.0}));
    EXPECT_NEAR(out.xi[0], 7.0, 1e-12);
    EXPECT_EQ(out.xi[1], 0.0);
    EXPECT_NEAR(out.xi[2], -7.0, 1e-12);
    EXPECT_EQ(out.x.grid, g);
}

TEST(ResolveField, ZeroFieldLogarithmic) {
    const ScalarField r(Grid::rectangle(4, 3, 1.0, 1.0), 0.0);
    const auto out = resolve_field(make_logarithmic(2.0), 0.1, r);
    for (std::size_t k = 0; k < r.size(); ++k) {
        EXPECT_EQ(out.x[k], 0.0);
        EXPECT_EQ(out.xi[k], 0.0);
    }
}

TEST(ResolveField, EqualsCellByCellLoop) {
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    const Grid g = Grid::line(50, 1.0);
    ScalarField r(g);
    for (double& v : r.values) v = u(rng);
    for (const auto& p : {make_logarithmic(2.0), make_double_well(), unit_obstacle()}) {
        const auto out = resolve_field(p, 0.05, r);
        for (std::size_t k = 0; k < g.size(); ++k) {
            const auto one = resolve(p, 0.05, r[k]);
            EXPECT_EQ(out.x[k], one.x);
            EXPECT_EQ(out.xi[k], one.xi);
        }
    }
}
