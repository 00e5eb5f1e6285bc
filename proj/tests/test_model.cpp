#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "phaseseg/model.hpp"

using namespace phaseseg;

namespace {

ModelSpec logarithmic_model(double rho_bound) {
    ModelSpec m;
    m.potential = make_logarithmic(2.0);
    m.coupling = default_concave_coupling();
    m.mobility = rational_mobility(1.0, 2.0);
    m.constants = {-rho_bound, rho_bound, m.potential.beta(-rho_bound), m.potential.beta(rho_bound)};
    return m;
}

}  // namespace

TEST(Potential, LogarithmicBetaValues) {
    const auto p = make_logarithmic(2.0);
    EXPECT_EQ(p.beta(0.0), 0.0);
    EXPECT_NEAR(p.beta(0.5), std::log(3.0), 1e-15);
    EXPECT_DOUBLE_EQ(p.pi(0.5), -2.0);
    EXPECT_FALSE(p.in_domain(1.0));
    EXPECT_THROW(p.beta(1.5), DomainError);
}

TEST(Potential, LogarithmicRequiresDoubleWell) {
    EXPECT_THROW(make_logarithmic(0.5), InvalidParameter);
    EXPECT_THROW(make_logarithmic(1.0), InvalidParameter);
}

TEST(Potential, DoubleWellDerivative) {
    const auto p = make_double_well();
    EXPECT_EQ(p.beta(1.0), 1.0);
    EXPECT_EQ(p.pi(1.0), -1.0);
    EXPECT_EQ(p.beta(1.0) + p.pi(1.0), 0.0);
    EXPECT_EQ(p.beta(0.0) + p.pi(0.0), 0.0);
    // d/dr (r^2 - 1)^2 / 4 = r^3 - r
    for (double r : {-3.0, -0.7, 0.2, 2.0, 5.5}) EXPECT_NEAR(p.beta(r) + p.pi(r), r * r * r - r, 1e-12);
    EXPECT_EQ(p.beta(2.0) + p.pi(2.0), 6.0);
}

TEST(Potential, ObstacleSubdifferential) {
    const auto p = make_obstacle(-1.0, 1.0, [](double r) { return -r; }, 1.0);
    EXPECT_TRUE(p.beta_contains(0.3, 0.0));
    EXPECT_TRUE(p.beta_contains(1.0, 5.0));
    EXPECT_FALSE(p.beta_contains(1.0, -1.0));
    EXPECT_TRUE(p.beta_contains(-1.0, -3.0));
    EXPECT_FALSE(p.beta_contains(-1.0, 0.5));
    EXPECT_FALSE(p.beta_contains(0.3, 0.1));
    EXPECT_FALSE(p.beta_contains(1.2, 0.0));
    EXPECT_THROW(make_obstacle(1.0, 1.0, [](double r) { return r; }, 1.0), InvalidParameter);
    EXPECT_THROW(make_obstacle(2.0, 1.0, [](double r) { return r; }, 1.0), InvalidParameter);
}

TEST(Potential, BetaIsMonotoneOnSamples) {
    std::mt19937_64 rng(7);
    const auto obstacle = make_obstacle(-1.0, 1.0, [](double r) { return -r; }, 1.0);
    for (const auto& p : {make_logarithmic(2.0), make_double_well(), obstacle}) {
        const double lo = p.kind == PotentialKind::double_well ? -5.0 : p.beta_domain.lo;
        const double hi = p.kind == PotentialKind::double_well ? 5.0 : p.beta_domain.hi;
        std::uniform_real_distribution<double> u(lo, hi);
        std::uniform_real_distribution<double> sel(0.0, 10.0);
        for (int i = 0; i < 2000; ++i) {
            double r1 = u(rng), r2 = u(rng);
            if (p.kind == PotentialKind::obstacle && i % 10 == 0) r1 = hi;  // exercise the active set
            if (!p.in_domain(r1) || !p.in_domain(r2)) continue;
            auto select = [&](double r) {
                if (p.single_valued()) return p.beta(r);
                if (r == p.beta_domain.hi) return sel(rng);
                if (r == p.beta_domain.lo) return -sel(rng);
                return 0.0;
            };
            const double x1 = select(r1), x2 = select(r2);
            ASSERT_TRUE(p.beta_contains(r1, x1, 1e-12));
            EXPECT_GE((x1 - x2) * (r1 - r2), 0.0) << r1 << ' ' << r2;
        }
    }
}

TEST(Potential, LogarithmicBlowsUpAtEnds) {
    const auto p = make_logarithmic(2.0);
    double prev_pos = 0.0, prev_neg = 0.0;
    for (int k = 1; k <= 12; ++k) {
        const double r = 1.0 - std::pow(10.0, -k);
        const double bp = std::abs(p.beta(r)), bn = std::abs(p.beta(-r));
        EXPECT_GT(bp, prev_pos);
        EXPECT_GT(bn, prev_neg);
        EXPECT_GT(p.beta(r), 0.0);
        EXPECT_LT(p.beta(-r), 0.0);
        prev_pos = bp;
        prev_neg = bn;
    }
}

TEST(Coupling, DefaultConcaveShape) {
    const auto c = default_concave_coupling();
    EXPECT_EQ(c.g(0.0), 1.0);
    EXPECT_EQ(c.g(1.0), 0.5);
    EXPECT_EQ(c.g_prime(-0.98), 0.98);
    EXPECT_EQ(c.g_prime(0.98), -0.98);
    // linear continuation is C^1 at the junction
    EXPECT_NEAR(c.g(1.0 + 1e-9), 0.5 - 1e-9, 1e-15);
    EXPECT_EQ(c.g_prime(1.5), -1.0);
}

TEST(Validate, LogarithmicDefaultPasses) {
    const auto m = logarithmic_model(0.98);
    EXPECT_NEAR(m.constants.xi_max, std::log(99.0), 1e-13);
    const auto rep = validate_model(m, 1000);
    for (const auto& c : rep.checks) EXPECT_TRUE(c.passed) << c.name << " margin " << c.worst_margin;
    EXPECT_TRUE(rep.all_passed());
    // xi_min + pi(rho_min) = -ln 99 + 3.92
    EXPECT_NEAR(rep.find("sign_lower")->worst_margin, std::log(99.0) - 3.92, 1e-12);
    EXPECT_NEAR(rep.find("sign_upper")->worst_margin, std::log(99.0) - 3.92, 1e-12);
    EXPECT_NEAR(rep.find("g_prime_lower")->worst_margin, 0.98, 1e-15);
}

TEST(Validate, LogarithmicTooNarrowBoxFails) {
    const auto m = logarithmic_model(0.95);
    const auto rep = validate_model(m, 1000);
    EXPECT_FALSE(rep.all_passed());
    const auto* up = rep.find("sign_upper");
    ASSERT_NE(up, nullptr);
    EXPECT_FALSE(up->passed);
    EXPECT_NEAR(up->worst_margin, std::log(39.0) - 3.8, 1e-12);  // ~ -0.136
}

TEST(Validate, ConstantMobilityZeroMargin) {
    auto m = logarithmic_model(0.98);
    m.mobility = constant_mobility(1.0);
    const auto rep = validate_model(m, 200);
    EXPECT_TRUE(rep.find("kappa_lower_bound")->passed);
    EXPECT_TRUE(rep.find("kappa_upper_bound")->passed);
    EXPECT_EQ(rep.find("kappa_lower_bound")->worst_margin, 0.0);
    EXPECT_EQ(rep.find("kappa_upper_bound")->worst_margin, 0.0);
}

TEST(Validate, MobilityDippingBelowLowerBoundFails) {
    auto m = logarithmic_model(0.98);
    m.mobility = Mobility{[](double x) { return 1.0 - 0.5 * std::exp(-x); }, 1.0, 2.0, false};
    const auto rep = validate_model(m, 200);
    EXPECT_FALSE(rep.find("kappa_lower_bound")->passed);
    EXPECT_NEAR(rep.find("kappa_lower_bound")->worst_margin, -0.5, 1e-12);
}

TEST(Validate, ConvexCouplingFailsConcavity) {
    auto m = logarithmic_model(0.98);
    m.coupling.g = [](double r) { return 1.0 + r * r; };
    m.coupling.g_prime = [](double r) { return 2.0 * r; };
    m.coupling.g_lipschitz = 2.0;
    m.coupling.g_prime_lipschitz = 2.0;
    const auto rep = validate_model(m, 500);
    EXPECT_FALSE(rep.find("g_concave")->passed);
    EXPECT_FALSE(rep.find("g_prime_lower")->passed);
}

TEST(Validate, UnderstatedLipschitzConstantFails) {
    auto m = logarithmic_model(0.98);
    m.coupling.g_lipschitz = 0.5;
    const auto rep = validate_model(m, 500);
    EXPECT_FALSE(rep.find("g_lipschitz")->passed);
    EXPECT_TRUE(rep.find("g_prime_lipschitz")->passed);
}

TEST(Validate, BoundOutsideDomainIsDomainError) {
    auto m = logarithmic_model(0.98);
    m.constants.rho_max = 1.0;
    EXPECT_THROW(validate_model(m, 100), DomainError);
    EXPECT_THROW(validate_model(m, 1), InvalidParameter);
}

TEST(Validate, Deterministic) {
    const auto m = logarithmic_model(0.98);
    const auto a = validate_model(m, 777), b = validate_model(m, 777);
    ASSERT_EQ(a.checks.size(), b.checks.size());
    for (std::size_t i = 0; i < a.checks.size(); ++i) {
        EXPECT_EQ(a.checks[i].name, b.checks[i].name);
        EXPECT_EQ(a.checks[i].passed, b.checks[i].passed);
        EXPECT_EQ(a.checks[i].worst_margin, b.checks[i].worst_margin);
    }
}

TEST(DefaultConstants, AllBuiltinsValidate) {
    const auto obstacle = make_obstacle(-1.0, 1.0, [](double r) { return -r; }, 1.0);
    for (const auto& p : {make_logarithmic(2.0), make_logarithmic(1.2), make_double_well(), obstacle}) {
        ModelSpec m{p, default_concave_coupling(), rational_mobility(1.0, 2.0), default_constants(p)};
        const auto rep = validate_model(m);
        for (const auto& c : rep.checks) EXPECT_TRUE(c.passed) << to_string(p.kind) << ' ' << c.name;
    }
    const auto k = default_constants(make_logarithmic(2.0));
    EXPECT_EQ(k.rho_max, 1.0 - 0.02);
    EXPECT_EQ(default_constants(obstacle).xi_min, -1.0);
}
