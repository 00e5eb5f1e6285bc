#pragma once
/**
 * @brief Resolvent (I + tau beta)^{-1} of the monotone graph beta = df1.
 *
 * Obstacle: projection onto [a, b]. Smooth kinds: the unique root of x + tau beta(x) = r,
 * found by Newton's method inside a maintained bracket with a bisection fallback whenever
 * the Newton iterate leaves the bracket. The selection xi = (r - x) / tau lies in beta(x).
 */

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <sstream>
#include <utility>

#include "phaseseg/errors.hpp"
#include "phaseseg/grid.hpp"
#include "phaseseg/model.hpp"

namespace phaseseg {

struct ProxResult {
    double x = 0.0;
    double xi = 0.0;
    int iterations = 0;
    double residual = 0.0;  // |x + tau beta(x) - r|, 0 for the obstacle
};

inline constexpr int kProxIterationCap = 200;
inline constexpr double kLogBracketGap = 1e-15;

inline double default_prox_tol(double r) { return 1e-12 * std::max(1.0, std::abs(r)); }

/// Resolvent at argument r. tol <= 0 selects default_prox_tol(r).
inline ProxResult resolve(const PotentialSplit& p, double tau, double r, double tol = 0.0) {
    if (!(tau > 0.0) || !std::isfinite(r)) throw InvalidParameter("resolve: tau > 0 and finite r required");
    if (tol <= 0.0) tol = default_prox_tol(r);

    if (p.kind == PotentialKind::obstacle) {
        const double x = std::clamp(r, p.beta_domain.lo, p.beta_domain.hi);
        return {x, (r - x) / tau, 0, 0.0};
    }

    // phi(x) = x + tau beta(x) - r is strictly increasing; its root lies between 0 and r.
    double lo = std::min(0.0, r);
    double hi = std::max(0.0, r);
    if (p.kind == PotentialKind::logarithmic) {
        lo = std::max(lo, -1.0 + kLogBracketGap);
        hi = std::min(hi, 1.0 - kLogBracketGap);
    }
    auto phi = [&](double x) { return x + tau * p.beta(x) - r; };

    double x = std::clamp(r, lo, hi);
    if (p.kind == PotentialKind::logarithmic) x = std::clamp(r / (1.0 + 2.0 * tau), lo, hi);
    double f = phi(x);
    int it = 0;
    for (; it < kProxIterationCap; ++it) {
        if (std::abs(f) <= tol) return {x, (r - x) / tau, it, std::abs(f)};
        if (f > 0.0)
            hi = x;
        else
            lo = x;
        // Bracket collapsed to adjacent doubles: x is the best representable root.
        if (std::nextafter(lo, hi) >= hi) {
            const double flo = phi(lo), fhi = phi(hi);
            const bool take_lo = std::abs(flo) <= std::abs(fhi);
            const double xb = take_lo ? lo : hi;
            return {xb, (r - xb) / tau, it, std::abs(take_lo ? flo : fhi)};
        }
        double next = x - f / (1.0 + tau * p.beta_derivative(x));
        if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
        x = next;
        f = phi(x);
    }
    if (std::abs(f) <= tol) return {x, (r - x) / tau, it, std::abs(f)};
    std::ostringstream os;
    os << "resolve: no convergence after " << kProxIterationCap << " iterations (r = " << r << ", tau = " << tau
       << ")";
    throw SolverFailure(os.str(), x, std::abs(f));
}

struct ProxFieldResult {
    ScalarField x;
    ScalarField xi;
    int max_iterations = 0;
};

/// Cellwise resolve over a field; errors carry the failing cell index.
inline ProxFieldResult resolve_field(const PotentialSplit& p, double tau, const ScalarField& r, double tol = 0.0) {
    ProxFieldResult out{ScalarField(r.grid), ScalarField(r.grid), 0};
    for (std::size_t k = 0; k < r.size(); ++k) {
        try {
            const ProxResult pr = resolve(p, tau, r[k], tol);
            out.x[k] = pr.x;
            out.xi[k] = pr.xi;
            out.max_iterations = std::max(out.max_iterations, pr.iterations);
        } catch (const SolverFailure& e) {
            std::ostringstream os;
            os << e.what() << " in cell " << k;
            throw SolverFailure(os.str(), e.last_iterate(), e.residual());
        }
    }
    return out;
}

}  // namespace phaseseg
