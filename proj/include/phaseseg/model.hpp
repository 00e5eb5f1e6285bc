#pragma once
/**
 * @brief Structural nonlinearities of the phase-segregation system and their validation.
 *
 * The potential is split as f = f1 + f2 with beta = df1 (maximal monotone, possibly
 * multivalued) and pi = f2' (Lipschitz). The coupling g enters the mu-equation through
 * the weight 1 + 2 g(rho) and the source mu g'(rho); the mobility kappa(mu) is bounded
 * between kappa_min and kappa_max. CompatibilityConstants carry the invariant box
 * [rho_min, rho_max] x [xi_min, xi_max] on which the dynamics live.
 */

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "phaseseg/errors.hpp"

namespace phaseseg {

using ScalarFn = std::function<double(double)>;

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// Real interval with independently open/closed ends; infinite ends are always open.
struct Interval {
    double lo = -kInf;
    double hi = kInf;
    bool lo_closed = false;
    bool hi_closed = false;

    static Interval open(double lo, double hi) { return {lo, hi, false, false}; }
    static Interval closed(double lo, double hi) { return {lo, hi, true, true}; }
    static Interval real_line() { return {}; }

    bool contains(double r) const {
        if (!std::isfinite(r)) return false;
        const bool above = lo_closed ? r >= lo : r > lo;
        const bool below = hi_closed ? r <= hi : r < hi;
        return above && below;
    }
    bool closure_contains(double r) const { return std::isfinite(r) && r >= lo && r <= hi; }
    double length() const { return hi - lo; }
};

enum class PotentialKind { logarithmic, double_well, obstacle };

inline const char* to_string(PotentialKind k) {
    switch (k) {
        case PotentialKind::logarithmic: return "logarithmic";
        case PotentialKind::double_well: return "double_well";
        case PotentialKind::obstacle: return "obstacle";
    }
    return "?";
}

/// f = f1 + f2 with beta = df1, pi = f2'.
struct PotentialSplit {
    PotentialKind kind = PotentialKind::double_well;
    double c = 0.0;  // logarithmic only: pi(r) = -2 c r
    Interval beta_domain = Interval::real_line();
    ScalarFn pi;
    double pi_lipschitz = 0.0;

    bool single_valued() const { return kind != PotentialKind::obstacle; }

    bool in_domain(double r) const { return beta_domain.contains(r); }

    /// beta(r) for the single-valued kinds; the minimal-norm section (0) for the obstacle.
    double beta(double r) const {
        if (!beta_domain.contains(r)) {
            std::ostringstream os;
            os << "beta evaluated outside its domain at r = " << r;
            throw DomainError(os.str());
        }
        switch (kind) {
            case PotentialKind::logarithmic: return std::log1p(r) - std::log1p(-r);
            case PotentialKind::double_well: return r * r * r;
            case PotentialKind::obstacle: return 0.0;
        }
        return 0.0;
    }

    /// d beta / dr on the interior of the domain (0 for the obstacle).
    double beta_derivative(double r) const {
        switch (kind) {
            case PotentialKind::logarithmic: return 2.0 / ((1.0 - r) * (1.0 + r));
            case PotentialKind::double_well: return 3.0 * r * r;
            case PotentialKind::obstacle: return 0.0;
        }
        return 0.0;
    }

    /// Membership xi in beta(r), with absolute slack tol for the single-valued kinds.
    bool beta_contains(double r, double xi, double tol = 0.0) const {
        if (!beta_domain.contains(r) || !std::isfinite(xi)) return false;
        if (kind == PotentialKind::obstacle) {
            const double a = beta_domain.lo;
            const double b = beta_domain.hi;
            if (r > a && r < b) return std::abs(xi) <= tol;
            if (r == a && r == b) return true;
            if (r == a) return xi <= tol;
            return xi >= -tol;
        }
        return std::abs(xi - beta(r)) <= tol;
    }

    /// Projection of y onto the (convex, closed) set beta(r).
    double project_onto_beta(double r, double y) const {
        if (kind != PotentialKind::obstacle) return beta(r);
        const double a = beta_domain.lo;
        const double b = beta_domain.hi;
        if (r > a && r < b) return 0.0;
        if (r == a) return std::min(y, 0.0);
        return std::max(y, 0.0);
    }
};

/// Logarithmic potential: beta(r) = ln((1+r)/(1-r)), pi(r) = -2 c r on (-1, 1). Requires c > 1.
inline PotentialSplit make_logarithmic(double c) {
    if (!(c > 1.0)) {
        std::ostringstream os;
        os << "logarithmic potential: c > 1 required for a double well (got c = " << c << ")";
        throw InvalidParameter(os.str());
    }
    PotentialSplit p;
    p.kind = PotentialKind::logarithmic;
    p.c = c;
    p.beta_domain = Interval::open(-1.0, 1.0);
    p.pi = [c](double r) { return -2.0 * c * r; };
    p.pi_lipschitz = 2.0 * c;
    return p;
}

/// Quartic double well (r^2 - 1)^2 / 4 split as f1 = r^4/4, f2 = (1 - 2 r^2)/4.
inline PotentialSplit make_double_well() {
    PotentialSplit p;
    p.kind = PotentialKind::double_well;
    p.beta_domain = Interval::real_line();
    p.pi = [](double r) { return -r; };
    p.pi_lipschitz = 1.0;
    return p;
}

/// Indicator of [a, b] plus a smooth part with derivative pi (Lipschitz constant pi_lipschitz).
inline PotentialSplit make_obstacle(double a, double b, ScalarFn pi, double pi_lipschitz) {
    if (!(a < b)) {
        std::ostringstream os;
        os << "obstacle potential: invalid interval [" << a << ", " << b << "], a < b required";
        throw InvalidParameter(os.str());
    }
    if (!pi) throw InvalidParameter("obstacle potential: pi must be supplied");
    if (!(pi_lipschitz >= 0.0)) throw InvalidParameter("obstacle potential: pi_lipschitz must be >= 0");
    PotentialSplit p;
    p.kind = PotentialKind::obstacle;
    p.beta_domain = Interval::closed(a, b);
    p.pi = std::move(pi);
    p.pi_lipschitz = pi_lipschitz;
    return p;
}

/// Coupling g with g >= 0, g'' <= 0 and Lipschitz g, g' certified on validity_interval.
struct Coupling {
    ScalarFn g;
    ScalarFn g_prime;
    double g_lipschitz = 0.0;
    double g_prime_lipschitz = 0.0;
    Interval validity_interval = Interval::closed(-1.0, 1.0);
    bool constant = false;
};

/// g(r) = 1 - r^2/2 on [-1, 1], continued linearly (slope -sign(r)) outside.
inline Coupling default_concave_coupling() {
    Coupling c;
    c.g = [](double r) {
        const double a = std::abs(r);
        return a <= 1.0 ? 1.0 - 0.5 * r * r : 0.5 - (a - 1.0);
    };
    c.g_prime = [](double r) {
        if (r > 1.0) return -1.0;
        if (r < -1.0) return 1.0;
        return -r;
    };
    c.g_lipschitz = 1.0;
    c.g_prime_lipschitz = 1.0;
    c.validity_interval = Interval::closed(-1.0, 1.0);
    return c;
}

/// g = value everywhere; value = 0 decouples u from rho (u = mu).
inline Coupling constant_coupling(double value, Interval validity = Interval::closed(-1.0, 1.0)) {
    if (!(value >= 0.0)) throw InvalidParameter("constant coupling: g must be nonnegative");
    Coupling c;
    c.g = [value](double) { return value; };
    c.g_prime = [](double) { return 0.0; };
    c.validity_interval = validity;
    c.constant = true;
    return c;
}

/// Mobility kappa on [0, +inf) with kappa_min <= kappa <= kappa_max.
struct Mobility {
    ScalarFn kappa;
    double kappa_min = 1.0;
    double kappa_max = 1.0;
    bool constant = false;

    double operator()(double m) const { return kappa(m); }
};

inline Mobility constant_mobility(double value) {
    if (!(value > 0.0)) throw InvalidParameter("constant mobility: value must be > 0");
    return Mobility{[value](double) { return value; }, value, value, true};
}

/// kappa(m) = kmin + (kmax - kmin) / (1 + m): decreasing from kmax at m = 0 to kmin as m -> inf.
inline Mobility rational_mobility(double kmin, double kmax) {
    if (!(kmin > 0.0) || !(kmax >= kmin))
        throw InvalidParameter("rational mobility: 0 < kappa.min <= kappa.max required");
    return Mobility{[kmin, kmax](double m) { return kmin + (kmax - kmin) / (1.0 + m); }, kmin, kmax,
                    kmin == kmax};
}

struct CompatibilityConstants {
    double rho_min = -1.0;
    double rho_max = 1.0;
    double xi_min = 0.0;
    double xi_max = 0.0;
};

struct ModelSpec {
    PotentialSplit potential;
    Coupling coupling;
    Mobility mobility;
    CompatibilityConstants constants;
};

/**
 * Admissible invariant box for a symmetric potential.
 *
 * logarithmic: rho_max is the first of 0.8, 0.98, 0.998, ... where beta + pi >= 0,
 * double_well: rho_max = 1 (the well), obstacle: the interval ends.
 * The xi bounds are selections of beta at the rho bounds satisfying the sign conditions.
 */
inline CompatibilityConstants default_constants(const PotentialSplit& p) {
    CompatibilityConstants k;
    switch (p.kind) {
        case PotentialKind::logarithmic: {
            double gap = 0.2;
            double r = 1.0 - gap;
            while (p.beta(r) + p.pi(r) < 0.0 && gap > 1e-12) {
                gap *= 0.1;
                r = 1.0 - gap;
            }
            k.rho_max = r;
            k.rho_min = -r;
            k.xi_max = p.beta(k.rho_max);
            k.xi_min = p.beta(k.rho_min);
            break;
        }
        case PotentialKind::double_well:
            k.rho_min = -1.0;
            k.rho_max = 1.0;
            k.xi_min = -1.0;
            k.xi_max = 1.0;
            break;
        case PotentialKind::obstacle:
            k.rho_min = p.beta_domain.lo;
            k.rho_max = p.beta_domain.hi;
            k.xi_min = std::min(0.0, -p.pi(k.rho_min));
            k.xi_max = std::max(0.0, -p.pi(k.rho_max));
            break;
    }
    return k;
}

struct ConditionCheck {
    std::string name;
    bool passed = false;
    double worst_margin = 0.0;  // >= 0 means satisfied; the most violated sample otherwise
};

struct ValidationReport {
    std::vector<ConditionCheck> checks;

    bool all_passed() const {
        return std::all_of(checks.begin(), checks.end(), [](const ConditionCheck& c) { return c.passed; });
    }
    const ConditionCheck* find(const std::string& name) const {
        for (const auto& c : checks)
            if (c.name == name) return &c;
        return nullptr;
    }
};

namespace detail {

inline double checked_eval(const ScalarFn& f, double r, const char* condition) {
    const double v = f(r);
    if (!std::isfinite(v)) {
        std::ostringstream os;
        os << "condition " << condition << ": non-finite value at r = " << r;
        throw DomainError(os.str());
    }
    return v;
}

inline std::vector<double> uniform_samples(double lo, double hi, std::size_t count) {
    std::vector<double> s(count);
    const double h = (hi - lo) / static_cast<double>(count - 1);
    for (std::size_t i = 0; i < count; ++i) s[i] = lo + h * static_cast<double>(i);
    s.back() = hi;
    return s;
}

inline ConditionCheck lipschitz_check(const std::string& name, const ScalarFn& f, double L,
                                      const std::vector<double>& pts) {
    double worst = 0.0;
    for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
        const double dx = pts[i + 1] - pts[i];
        if (dx <= 0.0) continue;
        const double q =
            std::abs(checked_eval(f, pts[i + 1], name.c_str()) - checked_eval(f, pts[i], name.c_str())) / dx;
        worst = std::max(worst, q);
    }
    const double slack = 1e-10 * std::max(1.0, L);
    return {name, worst <= L + slack, L - worst};
}

}  // namespace detail

/**
 * Checks every structural condition on a candidate model by dense sampling plus exact
 * evaluation at the compatibility points. Conditions are reported individually with their
 * worst margin. Throws DomainError if a compatibility point lies outside D(beta).
 */
inline ValidationReport validate_model(const ModelSpec& spec, std::size_t sample_count = 1000) {
    if (sample_count < 2) throw InvalidParameter("validate_model: sample_count >= 2 required");
    ValidationReport rep;
    auto add = [&rep](std::string name, bool ok, double margin) {
        rep.checks.push_back({std::move(name), ok, margin});
    };

    // Mobility: 0 plus a logarithmic sweep 1e-6 .. 1e6.
    const Mobility& mob = spec.mobility;
    add("kappa_min_positive", mob.kappa_min > 0.0, mob.kappa_min);
    add("kappa_bounds_ordered", mob.kappa_max >= mob.kappa_min, mob.kappa_max - mob.kappa_min);
    {
        std::vector<double> ms{0.0};
        for (std::size_t i = 0; i < sample_count; ++i) {
            const double e = -6.0 + 12.0 * static_cast<double>(i) / static_cast<double>(sample_count - 1);
            ms.push_back(std::pow(10.0, e));
        }
        double lower = kInf, upper = kInf;
        for (double m : ms) {
            const double k = detail::checked_eval(mob.kappa, m, "kappa_bounds");
            lower = std::min(lower, k - mob.kappa_min);
            upper = std::min(upper, mob.kappa_max - k);
        }
        add("kappa_lower_bound", lower >= 0.0, lower);
        add("kappa_upper_bound", upper >= 0.0, upper);
    }

    // Coupling on its validity interval.
    const Coupling& cp = spec.coupling;
    const Interval& vi = cp.validity_interval;
    if (!std::isfinite(vi.lo) || !std::isfinite(vi.hi) || !(vi.lo < vi.hi))
        throw InvalidParameter("validate_model: coupling validity interval must be bounded and nondegenerate");
    const auto gpts = detail::uniform_samples(vi.lo, vi.hi, sample_count);
    {
        double gmin = kInf, gsup = 0.0;
        for (double r : gpts) {
            const double v = detail::checked_eval(cp.g, r, "g_nonnegative");
            gmin = std::min(gmin, v);
            gsup = std::max(gsup, std::abs(v));
        }
        add("g_nonnegative", gmin >= 0.0, gmin);

        const double h = vi.length() / static_cast<double>(sample_count);
        const double tol = 1e-8 * std::max(1.0, gsup);
        double worst = -kInf;
        for (std::size_t i = 1; i + 1 < gpts.size(); ++i) {
            const double r = gpts[i];
            const double d2 = (detail::checked_eval(cp.g, r + h, "g_concave") - 2.0 * cp.g(r) +
                               detail::checked_eval(cp.g, r - h, "g_concave")) /
                              (h * h);
            worst = std::max(worst, d2);
        }
        if (gpts.size() < 3) worst = 0.0;
        add("g_concave", worst <= tol, -worst);
    }
    rep.checks.push_back(detail::lipschitz_check("g_lipschitz", cp.g, cp.g_lipschitz, gpts));
    rep.checks.push_back(detail::lipschitz_check("g_prime_lipschitz", cp.g_prime, cp.g_prime_lipschitz, gpts));

    // Compatibility constants.
    const auto& k = spec.constants;
    const PotentialSplit& pot = spec.potential;
    add("rho_bounds_ordered", k.rho_min <= k.rho_max, k.rho_max - k.rho_min);
    add("validity_covers_rho_bounds", vi.closure_contains(k.rho_min) && vi.closure_contains(k.rho_max),
        std::min(k.rho_min - vi.lo, vi.hi - k.rho_max));
    {
        const double lo = std::min(vi.lo, k.rho_min);
        const double hi = std::max(vi.hi, k.rho_max);
        rep.checks.push_back(
            detail::lipschitz_check("pi_lipschitz", pot.pi, pot.pi_lipschitz, detail::uniform_samples(lo, hi, sample_count)));
    }
    if (!pot.in_domain(k.rho_min))
        throw DomainError("condition rho_min_in_domain: rho_min lies outside D(beta)");
    if (!pot.in_domain(k.rho_max))
        throw DomainError("condition rho_max_in_domain: rho_max lies outside D(beta)");
    add("rho_min_in_domain", true, k.rho_min - pot.beta_domain.lo);
    add("rho_max_in_domain", true, pot.beta_domain.hi - k.rho_max);

    const double xtol = 1e-12 * std::max(1.0, std::abs(k.xi_min));
    const double xtol2 = 1e-12 * std::max(1.0, std::abs(k.xi_max));
    auto beta_gap = [&pot](double r, double xi) {
        if (pot.single_valued()) return -std::abs(xi - pot.beta(r));
        return -std::abs(xi - pot.project_onto_beta(r, xi));
    };
    add("xi_min_in_beta", pot.beta_contains(k.rho_min, k.xi_min, xtol), beta_gap(k.rho_min, k.xi_min));
    add("xi_max_in_beta", pot.beta_contains(k.rho_max, k.xi_max, xtol2), beta_gap(k.rho_max, k.xi_max));

    const double lower_sign = -(k.xi_min + detail::checked_eval(pot.pi, k.rho_min, "sign_lower"));
    const double upper_sign = k.xi_max + detail::checked_eval(pot.pi, k.rho_max, "sign_upper");
    add("sign_lower", lower_sign >= 0.0, lower_sign);
    add("sign_upper", upper_sign >= 0.0, upper_sign);

    const double gp_lo = detail::checked_eval(cp.g_prime, k.rho_min, "g_prime_lower");
    const double gp_hi = detail::checked_eval(cp.g_prime, k.rho_max, "g_prime_upper");
    add("g_prime_lower", gp_lo >= 0.0, gp_lo);
    add("g_prime_upper", gp_hi <= 0.0, -gp_hi);
    return rep;
}

/// Largest |g'| over the sampled validity interval.
inline double sup_abs_g_prime(const Coupling& cp, std::size_t samples = 1001) {
    double s = 0.0;
    for (double r : detail::uniform_samples(cp.validity_interval.lo, cp.validity_interval.hi, samples))
        s = std::max(s, std::abs(cp.g_prime(r)));
    return s;
}

}  // namespace phaseseg
